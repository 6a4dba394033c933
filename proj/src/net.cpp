#include "mlsh/net.hpp"

#include <cmath>
#include <cstring>

namespace mlsh {

NetParams::NetParams(int input_dim, int action_count, int hidden)
    : in_(input_dim), act_(action_count), hid_(hidden) {
  require(in_ > 0 && act_ > 0 && hid_ > 0, "NetParams: dimensions must be positive");
  o_w1_ = 0;
  o_b1_ = o_w1_ + static_cast<long>(hid_) * in_;
  o_w2_ = o_b1_ + hid_;
  o_b2_ = o_w2_ + static_cast<long>(hid_) * hid_;
  o_wp_ = o_b2_ + hid_;
  o_bp_ = o_wp_ + static_cast<long>(act_) * hid_;
  o_wv_ = o_bp_ + act_;
  o_bv_ = o_wv_ + hid_;
  p_ = Vec::Zero(o_bv_ + 1);
}

long NetParams::param_count(int input_dim, int action_count, int hidden) {
  long h = hidden;
  return h * input_dim + h + h * h + h + static_cast<long>(action_count) * h +
         action_count + h + 1;
}

void NetParams::set_flat(const Vec& flat) {
  require(flat.size() == p_.size(), "NetParams::set_flat: length mismatch");
  p_ = flat;
}

namespace {

// One-hot style observations (grid envs) have a couple of nonzero entries in
// hundreds of zeros; indexing the columns directly skips most of the first
// layer. Adding exact zeros is an IEEE identity, so both paths agree.
constexpr int kSparseInputLimit = 8;

int sparse_entries(const Vec& obs, int* idx) {
  int n = 0;
  for (int i = 0; i < obs.size(); ++i) {
    if (obs[i] != 0.0) {
      if (n == kSparseInputLimit) return -1;
      idx[n++] = i;
    }
  }
  return n;
}

Vec input_layer(const NetParams& net, const Vec& obs) {
  int idx[kSparseInputLimit];
  int n = sparse_entries(obs, idx);
  if (n < 0) return net.w1() * obs + net.b1();
  Vec z = net.b1();
  for (int i = 0; i < n; ++i) z += obs[idx[i]] * net.w1().col(idx[i]);
  return z;
}

}  // namespace

ForwardTrace forward_trace(const NetParams& net, const Vec& obs) {
  require(obs.size() == net.input_dim(), "forward: observation dimension mismatch");
  ForwardTrace t;
  t.h1 = input_layer(net, obs).array().tanh();
  t.h2 = (net.w2() * t.h1 + net.b2()).array().tanh();
  t.logits = net.w_pi() * t.h2 + net.b_pi();
  t.value = net.w_v().dot(t.h2) + net.b_v();
  return t;
}

std::pair<Vec, double> forward(const NetParams& net, const Vec& obs) {
  ForwardTrace t = forward_trace(net, obs);
  return {std::move(t.logits), t.value};
}

void backward_accum(const NetParams& net, const Vec& obs,
                    const ForwardTrace& trace, const Vec& logit_grad,
                    double value_grad, Vec& acc) {
  const int in = net.input_dim(), act = net.action_count(), hid = net.hidden_dim();
  require(logit_grad.size() == act, "backward: logit gradient dimension mismatch");
  require(obs.size() == in, "backward: observation dimension mismatch");
  if (acc.size() == 0) acc = Vec::Zero(net.param_count());
  require(acc.size() == net.param_count(), "backward: accumulator length mismatch");

  double* base = acc.data();
  long off = 0;
  Eigen::Map<Mat> g_w1(base + off, hid, in);
  off += static_cast<long>(hid) * in;
  Eigen::Map<Vec> g_b1(base + off, hid);
  off += hid;
  Eigen::Map<Mat> g_w2(base + off, hid, hid);
  off += static_cast<long>(hid) * hid;
  Eigen::Map<Vec> g_b2(base + off, hid);
  off += hid;
  Eigen::Map<Mat> g_wp(base + off, act, hid);
  off += static_cast<long>(act) * hid;
  Eigen::Map<Vec> g_bp(base + off, act);
  off += act;
  Eigen::Map<Vec> g_wv(base + off, hid);
  off += hid;
  double& g_bv = base[off];

  g_wp.noalias() += logit_grad * trace.h2.transpose();
  g_bp += logit_grad;
  g_wv += value_grad * trace.h2;
  g_bv += value_grad;

  Vec dh2 = net.w_pi().transpose() * logit_grad + value_grad * net.w_v();
  Vec dz2 = dh2.array() * (1.0 - trace.h2.array().square());
  g_w2.noalias() += dz2 * trace.h1.transpose();
  g_b2 += dz2;

  Vec dh1 = net.w2().transpose() * dz2;
  Vec dz1 = dh1.array() * (1.0 - trace.h1.array().square());
  int idx[kSparseInputLimit];
  int n = sparse_entries(obs, idx);
  if (n < 0) {
    g_w1.noalias() += dz1 * obs.transpose();
  } else {
    for (int i = 0; i < n; ++i) g_w1.col(idx[i]) += obs[idx[i]] * dz1;
  }
  g_b1 += dz1;
}

GradVector backward(const NetParams& net, const Vec& obs,
                    const Vec& logit_grad, double value_grad) {
  GradVector g(net.param_count());
  ForwardTrace trace = forward_trace(net, obs);
  backward_accum(net, obs, trace, logit_grad, value_grad, g.sum);
  g.count = 1;
  return g;
}

double log_sum_exp(const Vec& logits) {
  double m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum());
}

Vec log_softmax(const Vec& logits) {
  return logits.array() - log_sum_exp(logits);
}

std::pair<int, double> sample_categorical(const Vec& logits, Rng& rng) {
  require(logits.size() > 0, "sample_categorical: empty logits");
  const double m = logits.maxCoeff();
  Eigen::ArrayXd z = (logits.array() - m).exp();
  const double total = z.sum();
  double u = rng.uniform() * total;
  int index = static_cast<int>(logits.size()) - 1;
  double cum = 0.0;
  for (int i = 0; i < logits.size(); ++i) {
    cum += z[i];
    if (u < cum) {
      index = i;
      break;
    }
  }
  double logprob = logits[index] - (m + std::log(total));
  return {index, logprob};
}

void adam_step(NetParams& params, const Vec& grad, AdamState& state, double lr) {
  require(grad.size() == params.param_count(), "adam_step: gradient length mismatch");
  if (state.m.size() == 0) state = AdamState(params.param_count());
  require(state.m.size() == params.param_count(), "adam_step: state length mismatch");
  if (!grad.allFinite())
    throw NumericsError("adam_step: non-finite gradient rejected");

  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  Vec update = (state.m / c1).array() /
               ((state.v / c2).array().sqrt() + state.eps);
  Vec flat = params.flat();
  flat -= lr * update;
  params.set_flat(flat);
}

void adam_step(NetParams& params, const GradVector& grad, AdamState& state,
               double lr) {
  adam_step(params, grad.mean(), state, lr);
}

namespace {

// Orthogonal(ish) matrix via QR of a Gaussian draw, sign-fixed, then scaled.
Mat orthogonal_matrix(int rows, int cols, double gain, Rng& rng) {
  const bool tall = rows >= cols;
  const int r = tall ? rows : cols;
  const int c = tall ? cols : rows;
  Mat a(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(r, c);
  Mat rmat = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
  for (int j = 0; j < c; ++j)
    if (rmat(j, j) < 0) q.col(j) = -q.col(j);
  Mat w = tall ? q : Mat(q.transpose());
  return gain * w;
}

}  // namespace

NetParams init_net(int input_dim, int action_count, Rng& rng, int hidden) {
  NetParams net(input_dim, action_count, hidden);
  const double trunk_gain = std::sqrt(2.0);
  net.w1() = orthogonal_matrix(hidden, input_dim, trunk_gain, rng);
  net.w2() = orthogonal_matrix(hidden, hidden, trunk_gain, rng);
  net.w_pi() = orthogonal_matrix(action_count, hidden, 0.01, rng);
  net.w_v() = orthogonal_matrix(1, hidden, 1.0, rng).row(0);
  return net;  // biases stay zero
}

uint64_t fnv1a64(const void* data, size_t len, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t param_hash(const NetParams& net) {
  return fnv1a64(net.flat().data(),
                 static_cast<size_t>(net.param_count()) * sizeof(double));
}

}  // namespace mlsh
