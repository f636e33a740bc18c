#include "chanflow/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "chanflow/errors.hpp"

namespace chanflow {

namespace {

void apply_tanh(Matrix& Z, bool parallel) {
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < Z.rows; ++i) {
    double* zi = Z.row(i);
    for (int j = 0; j < Z.cols; ++j) zi[j] = std::tanh(zi[j]);
  }
}

// Loss denominator: sum_k w_k ||t_k||^2 (w = 1 for relative_mse).
double loss_denominator(const Matrix& T, const std::vector<double>& w, LossVariant variant) {
  double denom = 0.0;
  for (int k = 0; k < T.cols; ++k) {
    double t2 = 0.0;
    for (int i = 0; i < T.rows; ++i) t2 += T.at(i, k) * T.at(i, k);
    denom += variant == LossVariant::cell_weighted ? w[k] * t2 : t2;
  }
  if (denom == 0.0) throw NumericError("loss: zero denominator (all-zero targets)");
  return denom;
}

double data_loss(const Matrix& P, const Matrix& T, const std::vector<double>& w,
                 LossVariant variant) {
  const double denom = loss_denominator(T, w, variant);
  double num = 0.0;
  for (int k = 0; k < T.cols; ++k) {
    double e2 = 0.0;
    for (int i = 0; i < T.rows; ++i) {
      const double d = P.at(i, k) - T.at(i, k);
      e2 += d * d;
    }
    num += variant == LossVariant::cell_weighted ? w[k] * e2 : e2;
  }
  return num / denom;
}

double weight_penalty(const MlpModel& m, double l2) {
  if (l2 == 0.0) return 0.0;
  double sum = 0.0;
  for (const Matrix& W : m.weights)
    for (double w : W.a) sum += w * w;
  return l2 * sum;
}

struct Workspace {
  std::vector<Matrix> act;    // act[0] = X, act[l] = activation after layer l
  std::vector<Matrix> delta;  // reused per layer
};

// Forward with stored activations; returns the data loss.
double forward_store(const MlpModel& m, const Batch& b, LossVariant variant, Workspace& ws,
                     bool parallel) {
  const int L = m.n_layers();
  ws.act.resize(L + 1);
  ws.act[0] = b.X;
  for (int l = 0; l < L; ++l) {
    affine_forward(m.weights[l], m.biases[l], ws.act[l], ws.act[l + 1], parallel);
    if (l + 1 < L) apply_tanh(ws.act[l + 1], parallel);
  }
  return data_loss(ws.act[L], b.T, b.weights, variant);
}

double backward_impl(const MlpModel& m, const Batch& b, LossVariant variant, double l2,
                     Gradients& out, Workspace& ws, bool parallel) {
  const int L = m.n_layers();
  const int n = b.X.cols;
  const double loss_value = forward_store(m, b, variant, ws, parallel);
  const double denom = loss_denominator(b.T, b.weights, variant);

  out.dW.resize(L);
  out.db.resize(L);
  ws.delta.resize(L);

  // Output delta: d(loss)/d(pred) = 2 w_k (pred - t) / denom.
  Matrix& dL = ws.delta[L - 1];
  dL.rows = m.sizes[L];
  dL.cols = n;
  dL.a.resize(static_cast<size_t>(dL.rows) * dL.cols);
  const Matrix& P = ws.act[L];
  for (int i = 0; i < dL.rows; ++i) {
    for (int k = 0; k < n; ++k) {
      const double w = variant == LossVariant::cell_weighted ? b.weights[k] : 1.0;
      dL.at(i, k) = 2.0 * w * (P.at(i, k) - b.T.at(i, k)) / denom;
    }
  }

  for (int l = L - 1; l >= 0; --l) {
    Matrix& d = ws.delta[l];
    gemm_nt(d, ws.act[l], out.dW[l], parallel);
    if (l2 != 0.0) {
      Matrix& dW = out.dW[l];
      const Matrix& W = m.weights[l];
      for (size_t i = 0; i < dW.a.size(); ++i) dW.a[i] += 2.0 * l2 * W.a[i];
    }
    auto& db = out.db[l];
    db.assign(d.rows, 0.0);
    for (int i = 0; i < d.rows; ++i) {
      double acc = 0.0;
      const double* di = d.row(i);
      for (int k = 0; k < n; ++k) acc += di[k];
      db[i] = acc;
    }
    if (l > 0) {
      Matrix& dprev = ws.delta[l - 1];
      gemm_tn(m.weights[l], d, dprev, parallel);
      const Matrix& A = ws.act[l];  // tanh activations of layer l
#pragma omp parallel for schedule(static) if (parallel)
      for (int i = 0; i < dprev.rows; ++i) {
        double* dp = dprev.row(i);
        const double* ai = A.row(i);
        for (int k = 0; k < n; ++k) dp[k] *= 1.0 - ai[k] * ai[k];
      }
    }
  }
  return loss_value;
}

}  // namespace

MlpModel make_mlp(const std::vector<int>& sizes, uint64_t seed) {
  if (sizes.size() < 2) throw DataError("make_mlp: need at least input and output layer");
  MlpModel m;
  m.sizes = sizes;
  m.seed = seed;
  std::mt19937_64 rng(seed);
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix W(fan_out, fan_in);
    for (double& w : W.a) w = dist(rng);
    m.weights.push_back(std::move(W));
    m.biases.emplace_back(fan_out, 0.0);
  }
  return m;
}

std::vector<double> forward(const MlpModel& m, std::span<const double> input) {
  if (static_cast<int>(input.size()) != m.input_size())
    throw DataError("forward: input length mismatch");
  std::vector<double> a(input.begin(), input.end());
  std::vector<double> z;
  for (int l = 0; l < m.n_layers(); ++l) {
    const Matrix& W = m.weights[l];
    z.assign(W.rows, 0.0);
    for (int i = 0; i < W.rows; ++i) {
      double acc = m.biases[l][i];
      const double* wi = W.row(i);
      for (int j = 0; j < W.cols; ++j) acc += wi[j] * a[j];
      z[i] = acc;
    }
    if (l + 1 < m.n_layers())
      for (double& v : z) v = std::tanh(v);
    a = z;
  }
  return a;
}

Matrix forward_batch(const MlpModel& m, const Matrix& X, bool parallel) {
  if (X.rows != m.input_size()) throw DataError("forward_batch: input rows mismatch");
  Matrix a = X, z;
  for (int l = 0; l < m.n_layers(); ++l) {
    affine_forward(m.weights[l], m.biases[l], a, z, parallel);
    if (l + 1 < m.n_layers()) apply_tanh(z, parallel);
    std::swap(a, z);
  }
  return a;
}

Batch make_batch(const MlpModel& m, std::span<const StencilSample> samples) {
  const int n = static_cast<int>(samples.size());
  Batch b;
  b.X = Matrix(kInputSize, n);
  b.T = Matrix(4, n);
  b.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    const auto in = m.normalizer.normalize_inputs(samples[k].inputs);
    const auto t = m.normalizer.normalize_target(samples[k].target);
    for (int i = 0; i < kInputSize; ++i) b.X.at(i, k) = in[i];
    for (int i = 0; i < 4; ++i) b.T.at(i, k) = t[i];
    b.weights[k] = samples[k].area_weight;
  }
  return b;
}

double loss(const MlpModel& m, const Batch& b, LossVariant variant, bool parallel) {
  const Matrix P = forward_batch(m, b.X, parallel);
  return data_loss(P, b.T, b.weights, variant);
}

double objective(const MlpModel& m, const Batch& b, LossVariant variant, double l2,
                 bool parallel) {
  return loss(m, b, variant, parallel) + weight_penalty(m, l2);
}

void backward(const MlpModel& m, const Batch& b, LossVariant variant, double l2, Gradients& out,
              bool parallel) {
  if (b.X.rows != m.input_size() || b.T.rows != m.output_size() || b.X.cols != b.T.cols ||
      static_cast<int>(b.weights.size()) != b.X.cols)
    throw DataError("backward: batch shape mismatch");
  if (b.X.cols == 0) throw DataError("backward: empty batch");
  Workspace ws;
  backward_impl(m, b, variant, l2, out, ws, parallel);
}

AdamState make_adam_state(const MlpModel& m, double lr, double l2) {
  AdamState s;
  s.lr = lr;
  s.l2 = l2;
  for (const Matrix& W : m.weights) {
    s.mW.emplace_back(W.rows, W.cols);
    s.vW.emplace_back(W.rows, W.cols);
  }
  for (const auto& b : m.biases) {
    s.mb.emplace_back(b.size(), 0.0);
    s.vb.emplace_back(b.size(), 0.0);
  }
  return s;
}

void adam_step(MlpModel& m, const Gradients& g, AdamState& s) {
  if (g.dW.size() != m.weights.size() || g.db.size() != m.biases.size())
    throw DataError("adam_step: gradient/parameter layer count mismatch");
  s.step += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  auto update = [&](double& theta, double grad, double& mm, double& vv) {
    mm = s.beta1 * mm + (1.0 - s.beta1) * grad;
    vv = s.beta2 * vv + (1.0 - s.beta2) * grad * grad;
    const double mhat = mm / bc1;
    const double vhat = vv / bc2;
    theta -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  };
  for (size_t l = 0; l < m.weights.size(); ++l) {
    Matrix& W = m.weights[l];
    if (g.dW[l].rows != W.rows || g.dW[l].cols != W.cols)
      throw DataError("adam_step: weight gradient shape mismatch");
    for (size_t i = 0; i < W.a.size(); ++i)
      update(W.a[i], g.dW[l].a[i], s.mW[l].a[i], s.vW[l].a[i]);
    auto& b = m.biases[l];
    if (g.db[l].size() != b.size()) throw DataError("adam_step: bias gradient shape mismatch");
    for (size_t i = 0; i < b.size(); ++i) update(b[i], g.db[l][i], s.mb[l][i], s.vb[l][i]);
  }
}

TrainResult train(MlpModel& m, const Dataset& ds, const TrainConfig& cfg) {
  if (ds.samples.empty()) throw DataError("train: empty corpus");
  if (cfg.epochs < 1) throw DataError("train: epochs must be >= 1");
  m.normalizer = ds.normalizer.has_value() ? *ds.normalizer : fit_normalizer(ds.samples);

  const Batch full = make_batch(m, ds.samples);
  AdamState adam = make_adam_state(m, cfg.learning_rate, cfg.l2);
  Gradients grads;
  Workspace ws;
  TrainResult result;
  result.loss_history.reserve(cfg.epochs);

  const int n = full.X.cols;
  const bool full_batch = cfg.batch_size <= 0 || cfg.batch_size >= n;
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;

  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss;
    if (full_batch) {
      epoch_loss = backward_impl(m, full, cfg.variant, cfg.l2, grads, ws, cfg.parallel);
      adam_step(m, grads, adam);
    } else {
      std::mt19937_64 rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(epoch + 1)));
      std::shuffle(perm.begin(), perm.end(), rng);
      double acc = 0.0;
      int batches = 0;
      for (int start = 0; start < n; start += cfg.batch_size) {
        const int count = std::min(cfg.batch_size, n - start);
        Batch sub;
        sub.X = Matrix(full.X.rows, count);
        sub.T = Matrix(full.T.rows, count);
        sub.weights.resize(count);
        for (int k = 0; k < count; ++k) {
          const int src = perm[start + k];
          for (int i = 0; i < full.X.rows; ++i) sub.X.at(i, k) = full.X.at(i, src);
          for (int i = 0; i < full.T.rows; ++i) sub.T.at(i, k) = full.T.at(i, src);
          sub.weights[k] = full.weights[src];
        }
        acc += backward_impl(m, sub, cfg.variant, cfg.l2, grads, ws, cfg.parallel);
        adam_step(m, grads, adam);
        ++batches;
      }
      epoch_loss = acc / batches;
    }
    if (!std::isfinite(epoch_loss))
      throw NumericError("train: loss diverged at epoch " + std::to_string(epoch));
    result.loss_history.push_back(epoch_loss);
    if (cfg.log_every > 0 && epoch % cfg.log_every == 0)
      std::fprintf(stderr, "  epoch %ld loss %.6e\n", epoch, epoch_loss);
  }

  m.epochs_run += cfg.epochs;
  m.final_loss = result.loss_history.back();
  return result;
}

void save_checkpoint(const MlpModel& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open checkpoint for writing: " + path);
  f << "chanflow-mlp v1\n";
  f << "sizes " << m.sizes.size();
  for (int s : m.sizes) f << ' ' << s;
  f << '\n';
  char buf[96];
  std::snprintf(buf, sizeof(buf), "meta seed %llu epochs %ld final_loss %.17g\n",
                static_cast<unsigned long long>(m.seed), m.epochs_run, m.final_loss);
  f << buf;
  f << "normalizer";
  for (int var = 0; var < 6; ++var) {
    std::snprintf(buf, sizeof(buf), " %.17g %.17g", m.normalizer.lo[var], m.normalizer.hi[var]);
    f << buf;
  }
  f << '\n';
  for (int l = 0; l < m.n_layers(); ++l) {
    const Matrix& W = m.weights[l];
    f << "W " << l << ' ' << W.rows << ' ' << W.cols << '\n';
    for (int i = 0; i < W.rows; ++i) {
      for (int j = 0; j < W.cols; ++j) {
        std::snprintf(buf, sizeof(buf), j == 0 ? "%.17g" : " %.17g", W.at(i, j));
        f << buf;
      }
      f << '\n';
    }
    f << "b " << l << ' ' << m.biases[l].size() << '\n';
    for (size_t i = 0; i < m.biases[l].size(); ++i) {
      std::snprintf(buf, sizeof(buf), i == 0 ? "%.17g" : " %.17g", m.biases[l][i]);
      f << buf;
    }
    f << '\n';
  }
  f << "end\n";
  if (!f) throw DataError("failed writing checkpoint: " + path);
}

MlpModel load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  std::string magic, version;
  if (!(f >> magic >> version) || magic != "chanflow-mlp" || version != "v1")
    throw DataError("checkpoint version mismatch or bad magic: " + path);

  MlpModel m;
  std::string key;
  size_t n_sizes = 0;
  if (!(f >> key >> n_sizes) || key != "sizes" || n_sizes < 2)
    throw DataError("bad checkpoint sizes: " + path);
  m.sizes.resize(n_sizes);
  for (int& s : m.sizes)
    if (!(f >> s)) throw DataError("truncated checkpoint sizes: " + path);

  std::string k1, k2, k3;
  unsigned long long seed = 0;
  if (!(f >> key >> k1 >> seed >> k2 >> m.epochs_run >> k3 >> m.final_loss) || key != "meta")
    throw DataError("bad checkpoint metadata: " + path);
  m.seed = seed;

  if (!(f >> key) || key != "normalizer") throw DataError("bad checkpoint normalizer: " + path);
  for (int var = 0; var < 6; ++var)
    if (!(f >> m.normalizer.lo[var] >> m.normalizer.hi[var]))
      throw DataError("truncated checkpoint normalizer: " + path);

  for (size_t l = 0; l + 1 < n_sizes; ++l) {
    int idx = 0, rows = 0, cols = 0;
    if (!(f >> key >> idx >> rows >> cols) || key != "W" || idx != static_cast<int>(l) ||
        rows != m.sizes[l + 1] || cols != m.sizes[l])
      throw DataError("bad checkpoint weight block: " + path);
    Matrix W(rows, cols);
    for (double& w : W.a)
      if (!(f >> w)) throw DataError("truncated checkpoint weights: " + path);
    m.weights.push_back(std::move(W));
    size_t bn = 0;
    if (!(f >> key >> idx >> bn) || key != "b" || idx != static_cast<int>(l) ||
        bn != static_cast<size_t>(rows))
      throw DataError("bad checkpoint bias block: " + path);
    std::vector<double> b(bn);
    for (double& v : b)
      if (!(f >> v)) throw DataError("truncated checkpoint biases: " + path);
    m.biases.push_back(std::move(b));
  }
  if (!(f >> key) || key != "end") throw DataError("truncated checkpoint: " + path);
  return m;
}

}  // namespace chanflow
