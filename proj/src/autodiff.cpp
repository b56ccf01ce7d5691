#include "mripp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mripp::ad {

// ---------------------------------------------------------------- parameters

ParameterSet::ParameterSet(const ParameterSet& other) : index_(other.index_) {
  for (const auto& p : other.params_) params_.push_back(std::make_unique<Parameter>(*p));
}

ParameterSet& ParameterSet::operator=(const ParameterSet& other) {
  if (this != &other) {
    ParameterSet copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Parameter& ParameterSet::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor::Zero(rows, cols);
  p->grad = Tensor::Zero(rows, cols);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return *params_[it->second];
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return *params_[it->second];
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.setZero(p->value.rows(), p->value.cols());
}

nlohmann::json ParameterSet::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& p : params_) {
    std::vector<double> values(p->value.data(), p->value.data() + p->value.size());
    list.push_back({{"name", p->name}, {"shape", {p->value.rows(), p->value.cols()}}, {"values", values}});
  }
  return {{"format", "mripp-params"}, {"version", kParamFormatVersion}, {"parameters", list}};
}

void ParameterSet::load_json(const nlohmann::json& j) {
  if (j.value("format", "") != "mripp-params") throw std::invalid_argument("not a parameter document");
  if (j.value("version", 0) != kParamFormatVersion) throw std::invalid_argument("unsupported parameter version");
  const auto& list = j.at("parameters");
  if (list.size() != params_.size())
    throw std::invalid_argument("parameter count mismatch: file has " + std::to_string(list.size()) + ", model has " +
                                std::to_string(params_.size()));
  for (const auto& e : list) {
    Parameter& p = at(e.at("name").get<std::string>());
    const auto rows = e.at("shape").at(0).get<Eigen::Index>();
    const auto cols = e.at("shape").at(1).get<Eigen::Index>();
    if (rows != p.value.rows() || cols != p.value.cols())
      throw std::invalid_argument("shape mismatch for parameter '" + p.name + "'");
    const auto values = e.at("values").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != rows * cols)
      throw std::invalid_argument("value count mismatch for parameter '" + p.name + "'");
    std::copy(values.begin(), values.end(), p.value.data());
  }
}

// ---------------------------------------------------------------------- tape

const Tensor& Var::value() const { return tape_->value_of(id_); }

double Var::scalar() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("scalar(): value is not 1x1");
  return value()(0, 0);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_[&p] = id;
  return Var(this, id);
}

Var Tape::record(Tensor value, std::vector<int> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(), [&](int i) { return nodes_[i].requires_grad; });
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor& Tape::grad_of(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ != this) throw std::invalid_argument("backward: loss recorded on a different tape");
  if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError("backward: loss must be 1x1");
  if (!nodes_[loss.id_].requires_grad) throw DetachedGraphError("backward: loss does not depend on any parameter");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  visits_ = 0;
  grad_of(loss.id_)(0, 0) = 1.0;
  for (int i = loss.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) {
      n.backward(*this, i);
      ++visits_;
    }
    if (n.param != nullptr) {
      if (n.param->grad.rows() != n.value.rows() || n.param->grad.cols() != n.value.cols())
        n.param->grad = Tensor::Zero(n.value.rows(), n.value.cols());
      n.param->grad += n.grad;
    }
  }
}

Tensor Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id_];
  if (n.grad.size() == 0) return Tensor::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

// ----------------------------------------------------------------------- ops

namespace {

std::string shape_of(const Var& v) {
  std::ostringstream os;
  os << "[" << v.rows() << "x" << v.cols() << "]";
  return os.str();
}

void require_same_tape(const char* op, const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  require_same_tape(op, a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_of(a) + " vs " + shape_of(b));
}

void accumulate(Tape& t, int id, const Tensor& g) {
  if (t.requires_grad(id)) t.grad_of(id) += g;
}

template <class F>
Var unary(const Var& a, Tensor value, F grad_fn) {
  const int ia = a.id();
  return a.tape().record(std::move(value), {ia}, [ia, grad_fn](Tape& t, int self) {
    accumulate(t, ia, grad_fn(t.value_of(ia), t.value_of(self), t.grad_of(self)));
  });
}

void check_mask(const char* op, const Var& a, const Mask& mask) {
  if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != a.cols())
    throw ShapeError(std::string(op) + ": mask length " + std::to_string(mask.size()) + " vs " + shape_of(a));
  if (!mask.empty() && std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }))
    throw std::invalid_argument(std::string(op) + ": every entry is masked");
}

bool kept(const Mask& mask, Eigen::Index c) { return mask.empty() || mask[static_cast<std::size_t>(c)] != 0; }

// Row-wise masked softmax probabilities and log-sum-exp.
void masked_softmax_rows(const Tensor& a, const Mask& mask, Tensor& probs, Eigen::VectorXd& lse) {
  probs = Tensor::Zero(a.rows(), a.cols());
  lse.resize(a.rows());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      if (kept(mask, c)) mx = std::max(mx, a(r, c));
    double s = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      if (kept(mask, c)) {
        probs(r, c) = std::exp(a(r, c) - mx);
        s += probs(r, c);
      }
    probs.row(r) /= s;
    lse[r] = mx + std::log(s);
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require_same_tape("matmul", a, b);
  if (a.cols() != b.rows()) throw ShapeError("matmul: " + shape_of(a) + " x " + shape_of(b));
  const int ia = a.id(), ib = b.id();
  return a.tape().record(a.value() * b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (t.requires_grad(ia)) t.grad_of(ia).noalias() += g * t.value_of(ib).transpose();
    if (t.requires_grad(ib)) t.grad_of(ib).noalias() += t.value_of(ia).transpose() * g;
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require_same_tape("matmul_nt", a, b);
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: " + shape_of(a) + " x " + shape_of(b) + "^T");
  const int ia = a.id(), ib = b.id();
  return a.tape().record(a.value() * b.value().transpose(), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (t.requires_grad(ia)) t.grad_of(ia).noalias() += g * t.value_of(ib);
    if (t.requires_grad(ib)) t.grad_of(ib).noalias() += g.transpose() * t.value_of(ia);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  const int ia = a.id(), ib = b.id();
  return a.tape().record(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    accumulate(t, ia, t.grad_of(self));
    accumulate(t, ib, t.grad_of(self));
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  const int ia = a.id(), ib = b.id();
  return a.tape().record(a.value() - b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    accumulate(t, ia, t.grad_of(self));
    if (t.requires_grad(ib)) t.grad_of(ib) -= t.grad_of(self);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  const int ia = a.id(), ib = b.id();
  return a.tape().record(a.value().cwiseProduct(b.value()), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (t.requires_grad(ia)) t.grad_of(ia) += g.cwiseProduct(t.value_of(ib));
    if (t.requires_grad(ib)) t.grad_of(ib) += g.cwiseProduct(t.value_of(ia));
  });
}

Var add_bias(const Var& a, const Var& bias) {
  require_same_tape("add_bias", a, bias);
  if (bias.rows() != 1 || bias.cols() != a.cols())
    throw ShapeError("add_bias: " + shape_of(a) + " + " + shape_of(bias));
  const int ia = a.id(), ib = bias.id();
  Tensor v = a.value();
  v.rowwise() += bias.value().row(0);
  return a.tape().record(std::move(v), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    accumulate(t, ia, g);
    if (t.requires_grad(ib)) t.grad_of(ib) += g.colwise().sum();
  });
}

Var scale(const Var& a, double s) {
  return unary(a, a.value() * s, [s](const Tensor&, const Tensor&, const Tensor& g) -> Tensor { return g * s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, (a.value().array() + s).matrix(), [](const Tensor&, const Tensor&, const Tensor& g) { return g; });
}

Var relu(const Var& a) {
  return unary(a, a.value().cwiseMax(0.0), [](const Tensor& x, const Tensor&, const Tensor& g) -> Tensor {
    return (x.array() > 0.0).select(g, 0.0);
  });
}

Var tanh(const Var& a) {
  return unary(a, a.value().array().tanh().matrix(), [](const Tensor&, const Tensor& y, const Tensor& g) -> Tensor {
    return (g.array() * (1.0 - y.array().square())).matrix();
  });
}

Var exp(const Var& a) {
  return unary(a, a.value().array().exp().matrix(),
               [](const Tensor&, const Tensor& y, const Tensor& g) -> Tensor { return g.cwiseProduct(y); });
}

Var square(const Var& a) {
  return unary(a, a.value().array().square().matrix(),
               [](const Tensor& x, const Tensor&, const Tensor& g) -> Tensor { return 2.0 * g.cwiseProduct(x); });
}

Var softmax_masked(const Var& a, const Mask& mask) {
  check_mask("softmax_masked", a, mask);
  Tensor probs;
  Eigen::VectorXd lse;
  masked_softmax_rows(a.value(), mask, probs, lse);
  const int ia = a.id();
  return a.tape().record(std::move(probs), {ia}, [ia](Tape& t, int self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& p = t.value_of(self);
    const Tensor& g = t.grad_of(self);
    Tensor& ga = t.grad_of(ia);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const double dot = g.row(r).dot(p.row(r));
      ga.row(r).array() += p.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Var log_softmax_masked(const Var& a, const Mask& mask) {
  check_mask("log_softmax_masked", a, mask);
  Tensor probs;
  Eigen::VectorXd lse;
  masked_softmax_rows(a.value(), mask, probs, lse);
  Tensor out = Tensor::Zero(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      if (kept(mask, c)) out(r, c) = a.value()(r, c) - lse[r];
  const int ia = a.id();
  return a.tape().record(std::move(out), {ia}, [ia, probs, mask](Tape& t, int self) {
    if (!t.requires_grad(ia)) return;
    const Tensor& g = t.grad_of(self);
    Tensor& ga = t.grad_of(ia);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      double total = 0.0;
      for (Eigen::Index c = 0; c < g.cols(); ++c)
        if (kept(mask, c)) total += g(r, c);
      for (Eigen::Index c = 0; c < g.cols(); ++c)
        if (kept(mask, c)) ga(r, c) += g(r, c) - probs(r, c) * total;
    }
  });
}

Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps) {
  require_same_tape("layer_norm", a, gain);
  require_same_tape("layer_norm", a, bias);
  if (gain.rows() != 1 || gain.cols() != a.cols() || bias.rows() != 1 || bias.cols() != a.cols())
    throw ShapeError("layer_norm: " + shape_of(a) + " with gain " + shape_of(gain) + ", bias " + shape_of(bias));
  const Tensor& x = a.value();
  const Eigen::Index n = x.cols();
  Tensor xhat(x.rows(), n);
  Eigen::VectorXd inv(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv[r];
  }
  Tensor y = xhat;
  for (Eigen::Index r = 0; r < y.rows(); ++r)
    y.row(r) = y.row(r).cwiseProduct(gain.value().row(0)) + bias.value().row(0);
  const int ia = a.id(), ig = gain.id(), ib = bias.id();
  return a.tape().record(std::move(y), {ia, ig, ib}, [ia, ig, ib, xhat, inv, n](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (t.requires_grad(ig)) t.grad_of(ig) += g.cwiseProduct(xhat).colwise().sum();
    if (t.requires_grad(ib)) t.grad_of(ib) += g.colwise().sum();
    if (!t.requires_grad(ia)) return;
    const Tensor& gamma = t.value_of(ig);
    Tensor& ga = t.grad_of(ia);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const Eigen::RowVectorXd dxhat = g.row(r).cwiseProduct(gamma.row(0));
      const double s1 = dxhat.sum();
      const double s2 = dxhat.dot(xhat.row(r));
      ga.row(r).array() += inv[r] / n * (n * dxhat.array() - s1 - xhat.row(r).array() * s2);
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    require_same_tape("concat_cols", parts[0], p);
    if (p.rows() != parts[0].rows()) throw ShapeError("concat_cols: row mismatch " + shape_of(p));
    cols += p.cols();
  }
  Tensor v(parts[0].rows(), cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  return parts[0].tape().record(std::move(v), ids, [ids, offsets](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    for (std::size_t k = 0; k < ids.size(); ++k)
      if (t.requires_grad(ids[k])) t.grad_of(ids[k]) += g.middleCols(offsets[k], t.value_of(ids[k]).cols());
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    require_same_tape("concat_rows", parts[0], p);
    if (p.cols() != parts[0].cols()) throw ShapeError("concat_rows: column mismatch " + shape_of(p));
    rows += p.rows();
  }
  Tensor v(rows, parts[0].cols());
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.rows();
  }
  return parts[0].tape().record(std::move(v), ids, [ids, offsets](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    for (std::size_t k = 0; k < ids.size(); ++k)
      if (t.requires_grad(ids[k])) t.grad_of(ids[k]) += g.middleRows(offsets[k], t.value_of(ids[k]).rows());
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) + ") of " + shape_of(a));
  const int ia = a.id();
  return a.tape().record(a.value().middleCols(start, count), {ia}, [ia, start, count](Tape& t, int self) {
    if (t.requires_grad(ia)) t.grad_of(ia).middleCols(start, count) += t.grad_of(self);
  });
}

Var gather(const Var& a, Eigen::Index row, Eigen::Index col) {
  if (row < 0 || col < 0 || row >= a.rows() || col >= a.cols())
    throw ShapeError("gather: (" + std::to_string(row) + ", " + std::to_string(col) + ") of " + shape_of(a));
  const int ia = a.id();
  Tensor v(1, 1);
  v(0, 0) = a.value()(row, col);
  return a.tape().record(std::move(v), {ia}, [ia, row, col](Tape& t, int self) {
    if (t.requires_grad(ia)) t.grad_of(ia)(row, col) += t.grad_of(self)(0, 0);
  });
}

Var sum(const Var& a) {
  Tensor v(1, 1);
  v(0, 0) = a.value().sum();
  return unary(a, std::move(v), [](const Tensor& x, const Tensor&, const Tensor& g) -> Tensor {
    return Tensor::Constant(x.rows(), x.cols(), g(0, 0));
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mean_rows(const Var& a) {
  const double n = static_cast<double>(a.rows());
  return unary(a, a.value().colwise().mean(), [n](const Tensor& x, const Tensor&, const Tensor& g) -> Tensor {
    Tensor out(x.rows(), x.cols());
    out.rowwise() = g.row(0) / n;
    return out;
  });
}

Var minimum(const Var& a, const Var& b) {
  require_same_shape("minimum", a, b);
  const int ia = a.id(), ib = b.id();
  return a.tape().record(a.value().cwiseMin(b.value()), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    const auto take_a = (t.value_of(ia).array() <= t.value_of(ib).array());
    if (t.requires_grad(ia)) t.grad_of(ia) += take_a.select(g, 0.0).matrix();
    if (t.requires_grad(ib)) t.grad_of(ib) += take_a.select(0.0, g).matrix();
  });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(a, a.value().cwiseMax(lo).cwiseMin(hi), [lo, hi](const Tensor& x, const Tensor&, const Tensor& g) -> Tensor {
    return (x.array() > lo && x.array() < hi).select(g, 0.0);
  });
}

}  // namespace mripp::ad
