#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfes/rng.hpp"

namespace cfes {

struct NnError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Linear {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // row-major [out x in]
  std::vector<double> b;
};

// Dense stack: tanh on hidden layers, linear output.
struct Mlp {
  std::vector<Linear> layers;

  int input_width() const { return layers.front().in; }
  int output_width() const { return layers.back().out; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const Linear& l : layers) n += l.w.size() + l.b.size();
    return n;
  }
};

struct MlpGrads {
  std::vector<Linear> layers;  // same shapes, gradient values

  void zero() {
    for (Linear& l : layers) {
      std::fill(l.w.begin(), l.w.end(), 0.0);
      std::fill(l.b.begin(), l.b.end(), 0.0);
    }
  }
};

// Per-sample forward cache: activations after each layer (post-tanh for
// hidden layers, raw for the output layer), plus the input.
struct ForwardCache {
  std::vector<std::vector<double>> act;
};

namespace detail {

// Gram-Schmidt orthogonalization of gaussian rows (or columns when the
// matrix is tall), scaled by gain.
inline void orthogonal_init(Linear& l, double gain, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int rows = l.out, cols = l.in;
  const bool wide = cols >= rows;
  const int n = wide ? rows : cols;
  const int d = wide ? cols : rows;
  std::vector<std::vector<double>> v(static_cast<std::size_t>(n),
                                     std::vector<double>(static_cast<std::size_t>(d)));
  for (auto& row : v)
    for (double& x : row) x = gauss(rng);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      double dot = 0.0;
      for (int k = 0; k < d; ++k) dot += v[i][k] * v[j][k];
      for (int k = 0; k < d; ++k) v[i][k] -= dot * v[j][k];
    }
    double norm = 0.0;
    for (int k = 0; k < d; ++k) norm += v[i][k] * v[i][k];
    norm = std::sqrt(std::max(norm, 1e-12));
    for (int k = 0; k < d; ++k) v[i][k] /= norm;
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double x = wide ? v[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]
                      : v[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)];
      l.w[static_cast<std::size_t>(r) * cols + c] = gain * x;
    }
  }
  std::fill(l.b.begin(), l.b.end(), 0.0);
}

}  // namespace detail

inline Mlp make_mlp(int input, const std::vector<int>& hidden, int output,
                    Rng& rng, double head_gain = 0.01) {
  Mlp net;
  int prev = input;
  for (int h : hidden) {
    Linear l;
    l.in = prev;
    l.out = h;
    l.w.assign(static_cast<std::size_t>(l.in) * l.out, 0.0);
    l.b.assign(static_cast<std::size_t>(l.out), 0.0);
    detail::orthogonal_init(l, 1.0, rng);
    net.layers.push_back(std::move(l));
    prev = h;
  }
  Linear head;
  head.in = prev;
  head.out = output;
  head.w.assign(static_cast<std::size_t>(head.in) * head.out, 0.0);
  head.b.assign(static_cast<std::size_t>(head.out), 0.0);
  detail::orthogonal_init(head, head_gain, rng);
  net.layers.push_back(std::move(head));
  return net;
}

inline MlpGrads make_grads(const Mlp& net) {
  MlpGrads g;
  for (const Linear& l : net.layers) {
    Linear z;
    z.in = l.in;
    z.out = l.out;
    z.w.assign(l.w.size(), 0.0);
    z.b.assign(l.b.size(), 0.0);
    g.layers.push_back(std::move(z));
  }
  return g;
}

inline std::vector<double> forward(const Mlp& net, const std::vector<double>& x,
                                   ForwardCache* cache = nullptr) {
  if (static_cast<int>(x.size()) != net.input_width())
    throw NnError("forward: input width mismatch");
  if (cache) {
    cache->act.clear();
    cache->act.push_back(x);
  }
  std::vector<double> cur = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Linear& l = net.layers[i];
    std::vector<double> nxt(static_cast<std::size_t>(l.out));
    for (int r = 0; r < l.out; ++r) {
      const double* wr = &l.w[static_cast<std::size_t>(r) * l.in];
      double acc = l.b[static_cast<std::size_t>(r)];
      for (int c = 0; c < l.in; ++c) acc += wr[c] * cur[static_cast<std::size_t>(c)];
      nxt[static_cast<std::size_t>(r)] = acc;
    }
    if (i + 1 < net.layers.size()) {
      for (double& v : nxt) v = std::tanh(v);
    }
    if (cache) cache->act.push_back(nxt);
    cur = std::move(nxt);
  }
  return cur;
}

// Accumulates exact reverse-mode gradients of sum(output * output_grad)
// into grads. Returns nothing; chain multiple samples by repeated calls.
inline void backward(const Mlp& net, const ForwardCache& cache,
                     const std::vector<double>& output_grad, MlpGrads& grads) {
  std::vector<double> delta = output_grad;
  for (int i = static_cast<int>(net.layers.size()) - 1; i >= 0; --i) {
    const Linear& l = net.layers[static_cast<std::size_t>(i)];
    Linear& g = grads.layers[static_cast<std::size_t>(i)];
    const std::vector<double>& input = cache.act[static_cast<std::size_t>(i)];
    // tanh' applied to hidden-layer outputs (cached post-activation).
    if (i + 1 < static_cast<int>(net.layers.size())) {
      const std::vector<double>& out = cache.act[static_cast<std::size_t>(i) + 1];
      for (int r = 0; r < l.out; ++r) {
        double a = out[static_cast<std::size_t>(r)];
        delta[static_cast<std::size_t>(r)] *= (1.0 - a * a);
      }
    }
    for (int r = 0; r < l.out; ++r) {
      double d = delta[static_cast<std::size_t>(r)];
      g.b[static_cast<std::size_t>(r)] += d;
      double* gw = &g.w[static_cast<std::size_t>(r) * l.in];
      for (int c = 0; c < l.in; ++c) gw[c] += d * input[static_cast<std::size_t>(c)];
    }
    if (i > 0) {
      std::vector<double> prev(static_cast<std::size_t>(l.in), 0.0);
      for (int r = 0; r < l.out; ++r) {
        double d = delta[static_cast<std::size_t>(r)];
        const double* wr = &l.w[static_cast<std::size_t>(r) * l.in];
        for (int c = 0; c < l.in; ++c) prev[static_cast<std::size_t>(c)] += d * wr[c];
      }
      delta = std::move(prev);
    }
  }
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline AdamState make_adam(const Mlp& net) {
  AdamState s;
  s.m.assign(net.param_count(), 0.0);
  s.v.assign(net.param_count(), 0.0);
  return s;
}

namespace detail {

template <typename F>
void for_each_param(Mlp& net, MlpGrads& grads, F&& f) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Linear& l = net.layers[i];
    Linear& g = grads.layers[i];
    for (std::size_t j = 0; j < l.w.size(); ++j) f(l.w[j], g.w[j], idx++);
    for (std::size_t j = 0; j < l.b.size(); ++j) f(l.b[j], g.b[j], idx++);
  }
}

}  // namespace detail

inline double grad_norm(const MlpGrads& grads) {
  double acc = 0.0;
  for (const Linear& l : grads.layers) {
    for (double g : l.w) acc += g * g;
    for (double g : l.b) acc += g * g;
  }
  return std::sqrt(acc);
}

inline void clip_grad_norm(MlpGrads& grads, double max_norm) {
  double n = grad_norm(grads);
  if (n <= max_norm || n <= 0.0) return;
  double s = max_norm / n;
  for (Linear& l : grads.layers) {
    for (double& g : l.w) g *= s;
    for (double& g : l.b) g *= s;
  }
}

inline void adam_step(Mlp& net, MlpGrads& grads, double lr, AdamState& st) {
  ++st.t;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  detail::for_each_param(net, grads, [&](double& p, double& g, std::size_t i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
    double mhat = st.m[i] / bc1;
    double vhat = st.v[i] / bc2;
    p -= lr * mhat / (std::sqrt(vhat) + st.eps);
  });
}

// --- categorical heads -----------------------------------------------------

// Max-shifted softmax over a logits slice.
inline std::vector<double> softmax(const double* logits, int n) {
  double mx = logits[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  std::vector<double> p(static_cast<std::size_t>(n));
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    p[static_cast<std::size_t>(i)] = std::exp(logits[i] - mx);
    z += p[static_cast<std::size_t>(i)];
  }
  for (double& v : p) v /= z;
  return p;
}

struct HeadSample {
  int index = 0;
  double logprob = 0.0;
  double entropy = 0.0;
};

inline HeadSample sample_categorical(const double* logits, int n, Rng& rng) {
  std::vector<double> p = softmax(logits, n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  int idx = n - 1;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += p[static_cast<std::size_t>(i)];
    if (r < acc) {
      idx = i;
      break;
    }
  }
  HeadSample s;
  s.index = idx;
  s.logprob = std::log(std::max(p[static_cast<std::size_t>(idx)], 1e-300));
  for (int i = 0; i < n; ++i) {
    double pi = p[static_cast<std::size_t>(i)];
    if (pi > 0.0) s.entropy -= pi * std::log(pi);
  }
  return s;
}

inline int argmax(const double* v, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// Factored two-head policy over (antenna delta, sleep choice).
inline constexpr int kAntennaChoices = 3;
inline constexpr int kSleepChoices = 4;
inline constexpr int kPolicyLogits = kAntennaChoices + kSleepChoices;

struct PolicySample {
  int antenna_idx = 0;  // 0,1,2 -> delta -1,0,+1
  int sleep_idx = 0;
  double logprob = 0.0;  // joint = sum of head log-probs
  double entropy = 0.0;  // sum of head entropies
};

inline PolicySample sample_policy(const std::vector<double>& logits, Rng& rng) {
  HeadSample a = sample_categorical(logits.data(), kAntennaChoices, rng);
  HeadSample s =
      sample_categorical(logits.data() + kAntennaChoices, kSleepChoices, rng);
  PolicySample out;
  out.antenna_idx = a.index;
  out.sleep_idx = s.index;
  out.logprob = a.logprob + s.logprob;
  out.entropy = a.entropy + s.entropy;
  return out;
}

// Log-prob and entropy of a recorded action under current logits, plus the
// gradient of (logprob + ent_coef * entropy) w.r.t. the logits.
struct PolicyEval {
  double logprob = 0.0;
  double entropy = 0.0;
};

inline PolicyEval eval_policy(const std::vector<double>& logits, int antenna_idx,
                              int sleep_idx) {
  PolicyEval e;
  std::vector<double> pa = softmax(logits.data(), kAntennaChoices);
  std::vector<double> ps = softmax(logits.data() + kAntennaChoices, kSleepChoices);
  e.logprob = std::log(std::max(pa[static_cast<std::size_t>(antenna_idx)], 1e-300)) +
              std::log(std::max(ps[static_cast<std::size_t>(sleep_idx)], 1e-300));
  for (double p : pa)
    if (p > 0.0) e.entropy -= p * std::log(p);
  for (double p : ps)
    if (p > 0.0) e.entropy -= p * std::log(p);
  return e;
}

// --- checkpoint io ----------------------------------------------------------

inline constexpr std::uint32_t kCheckpointMagic = 0x43464553;  // "CFES"
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_mlp(std::ofstream& out, const Mlp& net) {
  std::uint32_t n = static_cast<std::uint32_t>(net.layers.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (const Linear& l : net.layers) {
    std::uint32_t in = static_cast<std::uint32_t>(l.in);
    std::uint32_t outw = static_cast<std::uint32_t>(l.out);
    out.write(reinterpret_cast<const char*>(&in), sizeof(in));
    out.write(reinterpret_cast<const char*>(&outw), sizeof(outw));
    out.write(reinterpret_cast<const char*>(l.w.data()),
              static_cast<std::streamsize>(l.w.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(l.b.data()),
              static_cast<std::streamsize>(l.b.size() * sizeof(double)));
  }
}

inline Mlp load_mlp(std::ifstream& in) {
  std::uint32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || n == 0 || n > 64) throw NnError("checkpoint: bad layer count");
  Mlp net;
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t inw = 0, outw = 0;
    in.read(reinterpret_cast<char*>(&inw), sizeof(inw));
    in.read(reinterpret_cast<char*>(&outw), sizeof(outw));
    if (!in || inw == 0 || outw == 0 || inw > 100000 || outw > 100000)
      throw NnError("checkpoint: bad layer shape");
    Linear l;
    l.in = static_cast<int>(inw);
    l.out = static_cast<int>(outw);
    l.w.resize(static_cast<std::size_t>(l.in) * l.out);
    l.b.resize(static_cast<std::size_t>(l.out));
    in.read(reinterpret_cast<char*>(l.w.data()),
            static_cast<std::streamsize>(l.w.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(l.b.data()),
            static_cast<std::streamsize>(l.b.size() * sizeof(double)));
    if (!in) throw NnError("checkpoint: truncated weights");
    net.layers.push_back(std::move(l));
  }
  return net;
}

// Versioned checkpoint: magic, version, kind tag, config echo, then nets.
inline void save_checkpoint(const std::string& path, const std::string& kind,
                            const std::string& config_echo,
                            const std::vector<Mlp>& nets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NnError("cannot write checkpoint: " + path);
  out.write(reinterpret_cast<const char*>(&kCheckpointMagic), 4);
  out.write(reinterpret_cast<const char*>(&kCheckpointVersion), 4);
  auto write_str = [&](const std::string& s) {
    std::uint64_t len = s.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  };
  write_str(kind);
  write_str(config_echo);
  std::uint32_t n = static_cast<std::uint32_t>(nets.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (const Mlp& net : nets) save_mlp(out, net);
}

struct Checkpoint {
  std::string kind;
  std::string config_echo;
  std::vector<Mlp> nets;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NnError("cannot open checkpoint: " + path);
  std::uint32_t magic = 0, version = 0;
  in.read(reinterpret_cast<char*>(&magic), 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  if (magic != kCheckpointMagic) throw NnError("checkpoint: bad magic");
  if (version != kCheckpointVersion) throw NnError("checkpoint: bad version");
  auto read_str = [&]() {
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len > (1u << 26)) throw NnError("checkpoint: bad string");
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    return s;
  };
  Checkpoint ck;
  ck.kind = read_str();
  ck.config_echo = read_str();
  std::uint32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || n > 1024) throw NnError("checkpoint: bad net count");
  for (std::uint32_t i = 0; i < n; ++i) ck.nets.push_back(load_mlp(in));
  return ck;
}

}  // namespace cfes
