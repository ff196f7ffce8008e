#include "comix/modules.hpp"

#include <cmath>

#include "comix/errors.hpp"

namespace comix::nn {

Param& ParamStore::add(const std::string& name, int rows, int cols) {
  if (by_name_.count(name))
    throw ContractViolation("ParamStore::add: duplicate name " + name);
  params_.push_back(Param{name, Tensor::zeros(rows, cols), Tensor::zeros(rows, cols)});
  Param& p = params_.back();
  by_name_.emplace(name, &p);
  return p;
}

Param& ParamStore::get(const std::string& name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ContractViolation("ParamStore::get: missing " + name);
  return *it->second;
}

const Param& ParamStore::get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ContractViolation("ParamStore::get: missing " + name);
  return *it->second;
}

size_t ParamStore::scalar_count() const {
  size_t n = 0;
  for (const Param& p : params_) n += p.value.v.size();
  return n;
}

void ParamStore::zero_grad() {
  for (Param& p : params_) p.grad.fill(0.0);
}

void ParamStore::copy_values_from(const ParamStore& src) {
  if (src.size() != size())
    throw ContractViolation("copy_values_from: param count mismatch");
  for (Param& p : params_) {
    const Param& s = src.get(p.name);
    if (!s.value.same_shape(p.value))
      throw ContractViolation("copy_values_from: shape mismatch for " + p.name);
    p.value = s.value;
  }
}

void init_uniform_fan_in(Tensor& t, int fan_in, Rng& rng) {
  if (fan_in <= 0) throw ContractViolation("init_uniform_fan_in: fan_in <= 0");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : t.v) x = uniform(rng, -bound, bound);
}

Value apply_act(Graph& g, Value v, Act act) {
  switch (act) {
    case Act::None: return v;
    case Act::Relu: return g.relu(v);
    case Act::Sigmoid: return g.sigmoid(v);
    case Act::Tanh: return g.tanh(v);
  }
  throw ContractViolation("apply_act: bad enum");
}

Linear::Linear(ParamStore& ps, Rng& rng, const std::string& name, int in, int out,
               bool bias) {
  W = &ps.add(name + ".W", in, out);
  init_uniform_fan_in(W->value, in, rng);
  if (bias) {
    b = &ps.add(name + ".b", 1, out);
    init_uniform_fan_in(b->value, in, rng);
  }
}

Value Linear::forward(Graph& g, Value x) const {
  Value y = g.matmul(x, g.param(*W));
  if (b) y = g.add(y, g.param(*b));
  return y;
}

LayerNormCol::LayerNormCol(ParamStore& ps, const std::string& name, int d) {
  gamma = &ps.add(name + ".gamma", 1, d);
  gamma->value.fill(1.0);
  beta = &ps.add(name + ".beta", 1, d);
}

Value LayerNormCol::forward(Graph& g, Value x) const {
  return g.layer_norm(x, g.param(*gamma), g.param(*beta));
}

GRUCell::GRUCell(ParamStore& ps, Rng& rng, const std::string& name, int in, int hidden) {
  W_ih = &ps.add(name + ".W_ih", in, 3 * hidden);
  init_uniform_fan_in(W_ih->value, in, rng);
  b_ih = &ps.add(name + ".b_ih", 1, 3 * hidden);
  init_uniform_fan_in(b_ih->value, in, rng);
  W_hh = &ps.add(name + ".W_hh", hidden, 3 * hidden);
  init_uniform_fan_in(W_hh->value, hidden, rng);
  b_hh = &ps.add(name + ".b_hh", 1, 3 * hidden);
  init_uniform_fan_in(b_hh->value, hidden, rng);
}

Value GRUCell::forward(Graph& g, Value x, Value h) const {
  const int H = hidden();
  Value gi = g.add(g.matmul(x, g.param(*W_ih)), g.param(*b_ih));
  Value gh = g.add(g.matmul(h, g.param(*W_hh)), g.param(*b_hh));
  Value r = g.sigmoid(g.add(g.slice_cols(gi, 0, H), g.slice_cols(gh, 0, H)));
  Value z = g.sigmoid(g.add(g.slice_cols(gi, H, H), g.slice_cols(gh, H, H)));
  Value n = g.tanh(g.add(g.slice_cols(gi, 2 * H, H),
                         g.mul(r, g.slice_cols(gh, 2 * H, H))));
  Value ones = g.constant(Tensor::full(x.rows(), H, 1.0));
  return g.add(g.mul(g.sub(ones, z), n), g.mul(z, h));
}

MLP2::MLP2(ParamStore& ps, Rng& rng, const std::string& name, int in, int hidden,
           int out, Act hidden_act_, Act out_act_)
    : l1(ps, rng, name + ".l1", in, hidden),
      l2(ps, rng, name + ".l2", hidden, out),
      hidden_act(hidden_act_),
      out_act(out_act_) {}

Value MLP2::forward(Graph& g, Value x) const {
  Value h = apply_act(g, l1.forward(g, x), hidden_act);
  return apply_act(g, l2.forward(g, h), out_act);
}

std::vector<Value> bigru_forward(Graph& g, const GRUCell& fwd, const GRUCell& bwd,
                                 const std::vector<Value>& seq) {
  if (seq.empty()) throw ContractViolation("bigru_forward: empty sequence");
  const int L = static_cast<int>(seq.size());
  const int B = seq[0].rows();
  std::vector<Value> hf(L), hb(L);
  Value h = g.zeros(B, fwd.hidden());
  for (int t = 0; t < L; ++t) {
    h = fwd.forward(g, seq[t], h);
    hf[t] = h;
  }
  h = g.zeros(B, bwd.hidden());
  for (int t = L - 1; t >= 0; --t) {
    h = bwd.forward(g, seq[t], h);
    hb[t] = h;
  }
  std::vector<Value> out(L);
  for (int t = 0; t < L; ++t) out[t] = g.concat_cols({hf[t], hb[t]});
  return out;
}

}  // namespace comix::nn
