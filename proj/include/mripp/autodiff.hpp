#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace mripp::ad {

/// Dense row-major 2-D tensor of doubles. Vectors are 1 x n rows.
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Column mask for masked softmax: nonzero = keep.
using Mask = std::vector<std::uint8_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when backward() is asked for a loss that no parameter reaches.
class DetachedGraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Ordered collection of named parameters with stable addresses.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet& other);
  ParameterSet& operator=(const ParameterSet& other);
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  Parameter& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t scalar_count() const;
  void zero_grad();

  /// {"format": "mripp-params", "version": 1, "parameters": [{name, shape, values}]}
  nlohmann::json to_json() const;
  /// Loads values by name; names and shapes must match exactly.
  void load_json(const nlohmann::json& j);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

inline constexpr int kParamFormatVersion = 1;

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape. Ops are recorded in execution order; backward() walks
/// them once in reverse and accumulates into Parameter::grad.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Var constant(Tensor value);
  /// Each parameter appears at most once per tape.
  Var param(Parameter& p);

  void backward(const Var& loss);
  /// Gradient of the last backward() loss w.r.t. v (zeros if unreached).
  Tensor grad(const Var& v) const;
  std::size_t size() const { return nodes_.size(); }
  /// Number of backward closures run by the last backward().
  std::size_t backward_visits() const { return visits_; }

  // Op-construction interface.
  Var record(Tensor value, std::vector<int> inputs, BackwardFn fn);
  const Tensor& value_of(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of node id, allocated lazily (only valid during backward).
  Tensor& grad_of(int id);
  const std::vector<int>& inputs_of(int id) const { return nodes_[id].inputs; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  std::size_t visits_ = 0;
};

// Forward ops. All shapes explicit; the only broadcast is add_bias.
Var matmul(const Var& a, const Var& b);
/// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// Adds a 1 x n bias to every row of a.
Var add_bias(const Var& a, const Var& bias);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var square(const Var& a);
/// Row-wise softmax over columns whose mask entry is nonzero; masked
/// entries get probability 0 and no gradient. An empty mask keeps all.
Var softmax_masked(const Var& a, const Mask& mask = {});
/// Row-wise log-softmax with the same masking; masked entries read 0.
Var log_softmax_masked(const Var& a, const Mask& mask = {});
Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps = 1e-5);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather(const Var& a, Eigen::Index row, Eigen::Index col);
Var sum(const Var& a);
Var mean(const Var& a);
/// Column means: r x c -> 1 x c.
Var mean_rows(const Var& a);
Var minimum(const Var& a, const Var& b);
Var clamp(const Var& a, double lo, double hi);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace mripp::ad
