#pragma once

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "comix/graph.hpp"
#include "comix/rng.hpp"
#include "comix/tensor.hpp"

namespace comix::nn {

// Named trainable tensor. Gradients accumulate into `grad` across
// backward passes until the optimizer consumes and clears them.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Owns every parameter of one model instance. Addresses are stable for
// the lifetime of the store, so modules keep raw pointers.
class ParamStore {
 public:
  // Creates a zero-initialized param; callers overwrite via init helpers.
  Param& add(const std::string& name, int rows, int cols);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool has(const std::string& name) const { return by_name_.count(name) != 0; }

  std::deque<Param>& all() { return params_; }
  const std::deque<Param>& all() const { return params_; }
  size_t size() const { return params_.size(); }
  size_t scalar_count() const;

  void zero_grad();
  // Copies values by name from another store with identical structure.
  void copy_values_from(const ParamStore& src);

 private:
  std::deque<Param> params_;
  std::unordered_map<std::string, Param*> by_name_;
};

// Uniform init in [-bound, bound] with bound = 1/sqrt(fan_in).
void init_uniform_fan_in(Tensor& t, int fan_in, Rng& rng);

enum class Act { None, Relu, Sigmoid, Tanh };

Value apply_act(Graph& g, Value v, Act act);

struct Linear {
  Param* W = nullptr;  // [in x out]
  Param* b = nullptr;  // [1 x out], optional
  Linear() = default;
  Linear(ParamStore& ps, Rng& rng, const std::string& name, int in, int out,
         bool bias = true);
  Value forward(Graph& g, Value x) const;
  int in() const { return W->value.rows(); }
  int out() const { return W->value.cols(); }
};

struct LayerNormCol {
  Param* gamma = nullptr;  // [1 x d], init 1
  Param* beta = nullptr;   // [1 x d], init 0
  LayerNormCol() = default;
  LayerNormCol(ParamStore& ps, const std::string& name, int d);
  Value forward(Graph& g, Value x) const;
};

// Gate layout in the packed matrices is r | z | n, candidate uses the
// reset-gated recurrent term: n = tanh(gi_n + r * gh_n).
struct GRUCell {
  Param* W_ih = nullptr;  // [in x 3h]
  Param* b_ih = nullptr;  // [1 x 3h]
  Param* W_hh = nullptr;  // [h x 3h]
  Param* b_hh = nullptr;  // [1 x 3h]
  GRUCell() = default;
  GRUCell(ParamStore& ps, Rng& rng, const std::string& name, int in, int hidden);
  Value forward(Graph& g, Value x, Value h) const;
  int hidden() const { return W_hh->value.rows(); }
  int in() const { return W_ih->value.rows(); }
};

struct MLP2 {
  Linear l1, l2;
  Act hidden_act = Act::Relu;
  Act out_act = Act::None;
  MLP2() = default;
  MLP2(ParamStore& ps, Rng& rng, const std::string& name, int in, int hidden,
       int out, Act hidden_act = Act::Relu, Act out_act = Act::None);
  Value forward(Graph& g, Value x) const;
};

// Bidirectional pass over a nonempty sequence: element t of the result is
// concat(h_fwd after steps 0..t, h_bwd after steps L-1..t). Initial hidden
// states are zeros. All sequence elements must share [B x in].
std::vector<Value> bigru_forward(Graph& g, const GRUCell& fwd, const GRUCell& bwd,
                                 const std::vector<Value>& seq);

}  // namespace comix::nn
