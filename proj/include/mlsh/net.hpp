#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

#include "mlsh/error.hpp"
#include "mlsh/rng.hpp"

namespace mlsh {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr int kDefaultHidden = 64;

/// Parameters of a two-hidden-layer tanh perceptron with a categorical policy
/// head and a scalar value head sharing the trunk. All parameters live in one
/// flat vector; the layer accessors are Eigen maps into it, so the flat view
/// and the structured view are the same storage.
///
/// Flat layout, in order: w1 (hidden x in), b1, w2 (hidden x hidden), b2,
/// w_pi (actions x hidden), b_pi, w_v (hidden), b_v. Matrices column-major.
class NetParams {
 public:
  NetParams() = default;
  NetParams(int input_dim, int action_count, int hidden = kDefaultHidden);

  int input_dim() const { return in_; }
  int action_count() const { return act_; }
  int hidden_dim() const { return hid_; }

  long param_count() const { return p_.size(); }
  static long param_count(int input_dim, int action_count,
                          int hidden = kDefaultHidden);

  const Vec& flat() const { return p_; }
  void set_flat(const Vec& flat);

  Eigen::Map<Mat> w1() { return {p_.data() + o_w1_, hid_, in_}; }
  Eigen::Map<const Mat> w1() const { return {p_.data() + o_w1_, hid_, in_}; }
  Eigen::Map<Vec> b1() { return {p_.data() + o_b1_, hid_}; }
  Eigen::Map<const Vec> b1() const { return {p_.data() + o_b1_, hid_}; }
  Eigen::Map<Mat> w2() { return {p_.data() + o_w2_, hid_, hid_}; }
  Eigen::Map<const Mat> w2() const { return {p_.data() + o_w2_, hid_, hid_}; }
  Eigen::Map<Vec> b2() { return {p_.data() + o_b2_, hid_}; }
  Eigen::Map<const Vec> b2() const { return {p_.data() + o_b2_, hid_}; }
  Eigen::Map<Mat> w_pi() { return {p_.data() + o_wp_, act_, hid_}; }
  Eigen::Map<const Mat> w_pi() const { return {p_.data() + o_wp_, act_, hid_}; }
  Eigen::Map<Vec> b_pi() { return {p_.data() + o_bp_, act_}; }
  Eigen::Map<const Vec> b_pi() const { return {p_.data() + o_bp_, act_}; }
  Eigen::Map<Vec> w_v() { return {p_.data() + o_wv_, hid_}; }
  Eigen::Map<const Vec> w_v() const { return {p_.data() + o_wv_, hid_}; }
  double& b_v() { return p_[o_bv_]; }
  double b_v() const { return p_[o_bv_]; }

 private:
  int in_ = 0, act_ = 0, hid_ = 0;
  long o_w1_ = 0, o_b1_ = 0, o_w2_ = 0, o_b2_ = 0, o_wp_ = 0, o_bp_ = 0,
       o_wv_ = 0, o_bv_ = 0;
  Vec p_;
};

/// Hidden activations kept around for the backward pass.
struct ForwardTrace {
  Vec h1, h2, logits;
  double value = 0.0;
};

/// Flat gradient accumulator aligned with the NetParams layout. The sum is
/// stored and divided on read, so averaging by count is exact.
struct GradVector {
  Vec sum;
  long long count = 0;

  GradVector() = default;
  explicit GradVector(long size) : sum(Vec::Zero(size)) {}

  void accumulate(const Vec& g, long long n = 1) {
    if (sum.size() == 0) sum = Vec::Zero(g.size());
    require(g.size() == sum.size(), "GradVector: length mismatch");
    sum += g;
    count += n;
  }

  void merge(const GradVector& other) {
    if (other.count == 0) return;
    accumulate(other.sum, 0);
    count += other.count;
  }

  Vec mean() const {
    require(count > 0, "GradVector: mean of empty accumulator");
    return sum / static_cast<double>(count);
  }
};

struct AdamState {
  Vec m, v;
  long long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-5;

  AdamState() = default;
  explicit AdamState(long size) : m(Vec::Zero(size)), v(Vec::Zero(size)) {}
};

ForwardTrace forward_trace(const NetParams& net, const Vec& obs);

/// (logits, value) for one observation.
std::pair<Vec, double> forward(const NetParams& net, const Vec& obs);

/// Adds the exact gradient of (logit_grad . logits + value_grad * value)
/// w.r.t. the flat parameters into acc. trace must come from the same
/// (net, obs) pair.
void backward_accum(const NetParams& net, const Vec& obs,
                    const ForwardTrace& trace, const Vec& logit_grad,
                    double value_grad, Vec& acc);

GradVector backward(const NetParams& net, const Vec& obs,
                    const Vec& logit_grad, double value_grad);

/// Samples an index from softmax(logits) with max-subtraction for stability.
/// Returns (index, log probability of that index).
std::pair<int, double> sample_categorical(const Vec& logits, Rng& rng);

Vec log_softmax(const Vec& logits);
double log_sum_exp(const Vec& logits);

void adam_step(NetParams& params, const Vec& grad, AdamState& state, double lr);
void adam_step(NetParams& params, const GradVector& grad, AdamState& state,
               double lr);

/// Orthogonal hidden weights (gain sqrt 2), policy head scaled to 0.01 so the
/// initial policy is near-uniform, value head gain 1, zero biases.
NetParams init_net(int input_dim, int action_count, Rng& rng,
                   int hidden = kDefaultHidden);

/// FNV-1a over the raw parameter bytes; used for identity checks and traces.
uint64_t param_hash(const NetParams& net);
uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace mlsh
