#include "vdlab/network.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "vdlab/rng.hpp"

namespace vdlab {

namespace {

double softplus(double z) {
  if (z > 20.0) return z;
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// y = W x + b, W row-major (rows x cols)
void matvec(const double* w, const double* x, const double* b, double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double acc = b ? b[r] : 0.0;
    const double* wr = w + static_cast<std::ptrdiff_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

// y += W^T g
void matvec_transpose_acc(const double* w, const double* g, double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double gr = g[r];
    const double* wr = w + static_cast<std::ptrdiff_t>(r) * cols;
    for (int c = 0; c < cols; ++c) y[c] += wr[c] * gr;
  }
}

// W_grad += g x^T
void outer_acc(double* w_grad, const double* g, const double* x, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* wr = w_grad + static_cast<std::ptrdiff_t>(r) * cols;
    const double gr = g[r];
    for (int c = 0; c < cols; ++c) wr[c] += gr * x[c];
  }
}

// Parameter blocks appear in a fixed order; this cursor walks it identically
// for init, forward and backward.
struct Cursor {
  std::int64_t pos = 0;
  std::int64_t take(std::int64_t n) {
    const std::int64_t at = pos;
    pos += n;
    return at;
  }
};

struct GruOffsets {
  std::int64_t wr, ur, br, wz, uz, bz, wn, un, bn;
};

GruOffsets gru_offsets(Cursor& cur, int input, int width) {
  GruOffsets o{};
  o.wr = cur.take(static_cast<std::int64_t>(width) * input);
  o.ur = cur.take(static_cast<std::int64_t>(width) * width);
  o.br = cur.take(width);
  o.wz = cur.take(static_cast<std::int64_t>(width) * input);
  o.uz = cur.take(static_cast<std::int64_t>(width) * width);
  o.bz = cur.take(width);
  o.wn = cur.take(static_cast<std::int64_t>(width) * input);
  o.un = cur.take(static_cast<std::int64_t>(width) * width);
  o.bn = cur.take(width);
  return o;
}

std::vector<int> dense_sizes(const NetworkShape& shape) {
  std::vector<int> sizes;
  sizes.push_back(shape.dense_input());
  for (int h : shape.hidden) sizes.push_back(h);
  sizes.push_back(shape.out);
  return sizes;
}

void check_shape(const NetworkShape& shape) {
  if (shape.tau < 0) throw std::invalid_argument("network: tau must be >= 0");
  if (shape.gru_layers < 0) throw std::invalid_argument("network: gru_layers must be >= 0");
  if (shape.gru_layers > 0 && shape.gru_width <= 0)
    throw std::invalid_argument("network: gru_width must be positive with GRU layers");
  if (shape.out <= 0) throw std::invalid_argument("network: output width must be positive");
  for (int h : shape.hidden)
    if (h <= 0) throw std::invalid_argument("network: hidden sizes must be positive");
}

}  // namespace

double mish(double z) { return z * std::tanh(softplus(z)); }

double mish_derivative(double z) {
  const double t = std::tanh(softplus(z));
  return t + z * (1.0 - t * t) * sigmoid(z);
}

std::int64_t network_param_count(const NetworkShape& shape) {
  check_shape(shape);
  Cursor cur;
  for (int l = 0; l < shape.gru_layers; ++l) {
    const int input = l == 0 ? kFeaturesPerStep : shape.gru_width;
    gru_offsets(cur, input, shape.gru_width);
  }
  const auto sizes = dense_sizes(shape);
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    cur.take(static_cast<std::int64_t>(sizes[i + 1]) * sizes[i]);
    cur.take(sizes[i + 1]);
  }
  return cur.pos;
}

std::vector<double> network_init(const NetworkShape& shape, std::uint64_t seed,
                                 bool zero_output_layer) {
  check_shape(shape);
  std::vector<double> params(static_cast<std::size_t>(network_param_count(shape)), 0.0);
  Rng rng(seed);

  Cursor cur;
  auto fill = [&](std::int64_t at, std::int64_t n, double bound) {
    for (std::int64_t i = 0; i < n; ++i)
      params[static_cast<std::size_t>(at + i)] = rng.uniform(-bound, bound);
  };

  for (int l = 0; l < shape.gru_layers; ++l) {
    const int input = l == 0 ? kFeaturesPerStep : shape.gru_width;
    const int w = shape.gru_width;
    const double bound = 1.0 / std::sqrt(static_cast<double>(w));
    const GruOffsets o = gru_offsets(cur, input, w);
    fill(o.wr, static_cast<std::int64_t>(w) * input, bound);
    fill(o.ur, static_cast<std::int64_t>(w) * w, bound);
    fill(o.br, w, bound);
    fill(o.wz, static_cast<std::int64_t>(w) * input, bound);
    fill(o.uz, static_cast<std::int64_t>(w) * w, bound);
    fill(o.bz, w, bound);
    fill(o.wn, static_cast<std::int64_t>(w) * input, bound);
    fill(o.un, static_cast<std::int64_t>(w) * w, bound);
    fill(o.bn, w, bound);
  }

  const auto sizes = dense_sizes(shape);
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const bool last = i + 2 == sizes.size();
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[i]));
    const std::int64_t w_at = cur.take(static_cast<std::int64_t>(sizes[i + 1]) * sizes[i]);
    const std::int64_t b_at = cur.take(sizes[i + 1]);
    if (last && zero_output_layer) continue;  // params already zeroed
    fill(w_at, static_cast<std::int64_t>(sizes[i + 1]) * sizes[i], bound);
    fill(b_at, sizes[i + 1], bound);
  }
  return params;
}

void network_forward(const NetworkShape& shape, const std::vector<double>& params, const double* x,
                     NetworkCache& cache) {
  assert(static_cast<std::int64_t>(params.size()) == network_param_count(shape));
  const int steps = shape.steps();
  const int gw = shape.gru_width;

  Cursor cur;
  std::vector<GruOffsets> go;
  go.reserve(static_cast<std::size_t>(shape.gru_layers));
  for (int l = 0; l < shape.gru_layers; ++l) {
    const int input = l == 0 ? kFeaturesPerStep : gw;
    go.push_back(gru_offsets(cur, input, gw));
  }

  const double* p = params.data();

  if (shape.gru_layers > 0) {
    const std::size_t cells = static_cast<std::size_t>(steps) * shape.gru_layers;
    cache.gru_r.assign(cells, {});
    cache.gru_z.assign(cells, {});
    cache.gru_n.assign(cells, {});
    cache.gru_h.assign(cells, {});

    std::vector<std::vector<double>> h(static_cast<std::size_t>(shape.gru_layers),
                                       std::vector<double>(static_cast<std::size_t>(gw), 0.0));
    std::vector<double> pre_r(static_cast<std::size_t>(gw));
    std::vector<double> pre_z(static_cast<std::size_t>(gw));
    std::vector<double> pre_n(static_cast<std::size_t>(gw));
    std::vector<double> rh(static_cast<std::size_t>(gw));

    for (int t = 0; t < steps; ++t) {
      const double* xt = x + static_cast<std::ptrdiff_t>(t) * kFeaturesPerStep;
      for (int l = 0; l < shape.gru_layers; ++l) {
        const int input = l == 0 ? kFeaturesPerStep : gw;
        const double* xl = l == 0 ? xt : h[static_cast<std::size_t>(l - 1)].data();
        const auto& o = go[static_cast<std::size_t>(l)];
        auto& hp = h[static_cast<std::size_t>(l)];

        matvec(p + o.wr, xl, p + o.br, pre_r.data(), gw, input);
        matvec(p + o.wz, xl, p + o.bz, pre_z.data(), gw, input);
        for (int i = 0; i < gw; ++i) {
          double acc_r = 0.0, acc_z = 0.0;
          const double* ur = p + o.ur + static_cast<std::ptrdiff_t>(i) * gw;
          const double* uz = p + o.uz + static_cast<std::ptrdiff_t>(i) * gw;
          for (int j = 0; j < gw; ++j) {
            acc_r += ur[j] * hp[static_cast<std::size_t>(j)];
            acc_z += uz[j] * hp[static_cast<std::size_t>(j)];
          }
          pre_r[static_cast<std::size_t>(i)] += acc_r;
          pre_z[static_cast<std::size_t>(i)] += acc_z;
        }

        const std::size_t cell = static_cast<std::size_t>(t) * shape.gru_layers +
                                 static_cast<std::size_t>(l);
        auto& r = cache.gru_r[cell];
        auto& zg = cache.gru_z[cell];
        auto& n = cache.gru_n[cell];
        r.resize(static_cast<std::size_t>(gw));
        zg.resize(static_cast<std::size_t>(gw));
        n.resize(static_cast<std::size_t>(gw));

        for (int i = 0; i < gw; ++i) {
          r[static_cast<std::size_t>(i)] = sigmoid(pre_r[static_cast<std::size_t>(i)]);
          zg[static_cast<std::size_t>(i)] = sigmoid(pre_z[static_cast<std::size_t>(i)]);
          rh[static_cast<std::size_t>(i)] =
              r[static_cast<std::size_t>(i)] * hp[static_cast<std::size_t>(i)];
        }
        matvec(p + o.wn, xl, p + o.bn, pre_n.data(), gw, input);
        for (int i = 0; i < gw; ++i) {
          double acc = 0.0;
          const double* un = p + o.un + static_cast<std::ptrdiff_t>(i) * gw;
          for (int j = 0; j < gw; ++j) acc += un[j] * rh[static_cast<std::size_t>(j)];
          n[static_cast<std::size_t>(i)] = std::tanh(pre_n[static_cast<std::size_t>(i)] + acc);
        }
        for (int i = 0; i < gw; ++i) {
          const std::size_t u = static_cast<std::size_t>(i);
          hp[u] = (1.0 - zg[u]) * hp[u] + zg[u] * n[u];
        }
        cache.gru_h[cell] = hp;
      }
    }
    cache.act.assign(1, h.back());
  } else {
    cache.act.assign(1, std::vector<double>(x, x + shape.flat_input()));
  }

  // dense stack
  const auto sizes = dense_sizes(shape);
  const std::size_t n_dense = sizes.size() - 1;
  cache.pre.assign(n_dense, {});
  cache.act.resize(n_dense + 1);
  for (std::size_t i = 0; i < n_dense; ++i) {
    const int in = sizes[i];
    const int out = sizes[i + 1];
    const std::int64_t w_at = cur.take(static_cast<std::int64_t>(out) * in);
    const std::int64_t b_at = cur.take(out);
    auto& pre = cache.pre[i];
    pre.resize(static_cast<std::size_t>(out));
    matvec(p + w_at, cache.act[i].data(), p + b_at, pre.data(), out, in);
    auto& act = cache.act[i + 1];
    act.resize(static_cast<std::size_t>(out));
    const bool last = i + 1 == n_dense;
    for (int j = 0; j < out; ++j) {
      act[static_cast<std::size_t>(j)] =
          last ? pre[static_cast<std::size_t>(j)] : mish(pre[static_cast<std::size_t>(j)]);
    }
  }
  cache.out = cache.act.back();
}

void network_backward(const NetworkShape& shape, const std::vector<double>& params,
                      const double* x, const NetworkCache& cache, const double* adj_out,
                      std::vector<double>& grad) {
  assert(grad.size() == params.size());
  const int gw = shape.gru_width;

  Cursor cur;
  std::vector<GruOffsets> go;
  go.reserve(static_cast<std::size_t>(shape.gru_layers));
  for (int l = 0; l < shape.gru_layers; ++l) {
    const int input = l == 0 ? kFeaturesPerStep : gw;
    go.push_back(gru_offsets(cur, input, gw));
  }

  const double* p = params.data();
  double* g = grad.data();

  // dense stack backward
  const auto sizes = dense_sizes(shape);
  const std::size_t n_dense = sizes.size() - 1;
  std::vector<std::int64_t> w_at(n_dense), b_at(n_dense);
  for (std::size_t i = 0; i < n_dense; ++i) {
    w_at[i] = cur.take(static_cast<std::int64_t>(sizes[i + 1]) * sizes[i]);
    b_at[i] = cur.take(sizes[i + 1]);
  }

  std::vector<double> adj(adj_out, adj_out + shape.out);
  for (std::size_t i = n_dense; i-- > 0;) {
    const int in = sizes[i];
    const int out = sizes[i + 1];
    const bool last = i + 1 == n_dense;
    std::vector<double> adj_pre(static_cast<std::size_t>(out));
    for (int j = 0; j < out; ++j) {
      const std::size_t u = static_cast<std::size_t>(j);
      adj_pre[u] = last ? adj[u] : adj[u] * mish_derivative(cache.pre[i][u]);
    }
    outer_acc(g + w_at[i], adj_pre.data(), cache.act[i].data(), out, in);
    for (int j = 0; j < out; ++j) g[b_at[i] + j] += adj_pre[static_cast<std::size_t>(j)];
    std::vector<double> adj_prev(static_cast<std::size_t>(in), 0.0);
    matvec_transpose_acc(p + w_at[i], adj_pre.data(), adj_prev.data(), out, in);
    adj = std::move(adj_prev);
  }

  if (shape.gru_layers == 0) return;  // input adjoint discarded; inputs are data

  // BPTT through the GRU stack. adj currently holds the adjoint of the top
  // layer's final hidden state.
  const int steps = shape.steps();
  const std::vector<double> zero(static_cast<std::size_t>(gw), 0.0);
  std::vector<std::vector<double>> adj_h(static_cast<std::size_t>(shape.gru_layers), zero);
  adj_h.back() = adj;

  std::vector<double> an(static_cast<std::size_t>(gw));
  std::vector<double> az(static_cast<std::size_t>(gw));
  std::vector<double> ar(static_cast<std::size_t>(gw));
  std::vector<double> adj_r(static_cast<std::size_t>(gw));
  std::vector<double> tmp(static_cast<std::size_t>(gw));
  std::vector<double> rh(static_cast<std::size_t>(gw));

  for (int t = steps - 1; t >= 0; --t) {
    const double* xt = x + static_cast<std::ptrdiff_t>(t) * kFeaturesPerStep;
    for (int l = shape.gru_layers - 1; l >= 0; --l) {
      const std::size_t cell =
          static_cast<std::size_t>(t) * shape.gru_layers + static_cast<std::size_t>(l);
      const auto& o = go[static_cast<std::size_t>(l)];
      const int input = l == 0 ? kFeaturesPerStep : gw;
      const double* xl =
          l == 0 ? xt
                 : cache.gru_h[cell - 1].data();  // layer below, same step
      const double* h_prev =
          t == 0 ? zero.data()
                 : cache.gru_h[cell - static_cast<std::size_t>(shape.gru_layers)].data();
      const auto& r = cache.gru_r[cell];
      const auto& zg = cache.gru_z[cell];
      const auto& n = cache.gru_n[cell];
      auto& gh = adj_h[static_cast<std::size_t>(l)];

      std::vector<double> adj_hprev(static_cast<std::size_t>(gw), 0.0);
      for (int i = 0; i < gw; ++i) {
        const std::size_t u = static_cast<std::size_t>(i);
        const double adj_n = gh[u] * zg[u];
        const double adj_zg = gh[u] * (n[u] - h_prev[i]);
        adj_hprev[u] = gh[u] * (1.0 - zg[u]);
        an[u] = adj_n * (1.0 - n[u] * n[u]);
        az[u] = adj_zg * zg[u] * (1.0 - zg[u]);
        rh[u] = r[u] * h_prev[i];
      }

      std::vector<double> adj_x(static_cast<std::size_t>(input), 0.0);

      // candidate block
      outer_acc(g + o.wn, an.data(), xl, gw, input);
      outer_acc(g + o.un, an.data(), rh.data(), gw, gw);
      for (int i = 0; i < gw; ++i) g[o.bn + i] += an[static_cast<std::size_t>(i)];
      matvec_transpose_acc(p + o.wn, an.data(), adj_x.data(), gw, input);
      std::fill(tmp.begin(), tmp.end(), 0.0);
      matvec_transpose_acc(p + o.un, an.data(), tmp.data(), gw, gw);
      for (int i = 0; i < gw; ++i) {
        const std::size_t u = static_cast<std::size_t>(i);
        adj_r[u] = tmp[u] * h_prev[i];
        adj_hprev[u] += tmp[u] * r[u];
        ar[u] = adj_r[u] * r[u] * (1.0 - r[u]);
      }

      // update gate block
      outer_acc(g + o.wz, az.data(), xl, gw, input);
      outer_acc(g + o.uz, az.data(), h_prev, gw, gw);
      for (int i = 0; i < gw; ++i) g[o.bz + i] += az[static_cast<std::size_t>(i)];
      matvec_transpose_acc(p + o.wz, az.data(), adj_x.data(), gw, input);
      matvec_transpose_acc(p + o.uz, az.data(), adj_hprev.data(), gw, gw);

      // reset gate block
      outer_acc(g + o.wr, ar.data(), xl, gw, input);
      outer_acc(g + o.ur, ar.data(), h_prev, gw, gw);
      for (int i = 0; i < gw; ++i) g[o.br + i] += ar[static_cast<std::size_t>(i)];
      matvec_transpose_acc(p + o.wr, ar.data(), adj_x.data(), gw, input);
      matvec_transpose_acc(p + o.ur, ar.data(), adj_hprev.data(), gw, gw);

      gh = std::move(adj_hprev);  // adjoint of h_{l, t-1}
      if (l > 0) {
        auto& below = adj_h[static_cast<std::size_t>(l - 1)];
        for (int i = 0; i < gw; ++i) below[static_cast<std::size_t>(i)] += adj_x[static_cast<std::size_t>(i)];
      }
    }
  }
}

}  // namespace vdlab
