#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <numeric>

#include "cfes/nn.hpp"

using namespace cfes;

namespace {

// Central-difference derivative of f = sum(output * out_grad) w.r.t. every
// parameter; the oracle for the analytic backward pass.
double numeric_grad(Mlp& net, const std::vector<double>& x,
                    const std::vector<double>& og, double& param) {
  const double h = 1e-6;
  double orig = param;
  param = orig + h;
  std::vector<double> up = forward(net, x);
  param = orig - h;
  std::vector<double> dn = forward(net, x);
  param = orig;
  double fu = 0.0, fd = 0.0;
  for (std::size_t i = 0; i < og.size(); ++i) {
    fu += up[i] * og[i];
    fd += dn[i] * og[i];
  }
  return (fu - fd) / (2.0 * h);
}

}  // namespace

TEST_CASE("orthogonal init gives orthonormal rows scaled by the gain") {
  Rng rng = make_rng(1, "test-init");
  Mlp net = make_mlp(16, {8}, 4, rng, 0.01);
  const Linear& l = net.layers[0];
  for (int r = 0; r < 8; ++r) {
    for (int s = r; s < 8; ++s) {
      double dot = 0.0;
      for (int c = 0; c < 16; ++c) dot += l.w[r * 16 + c] * l.w[s * 16 + c];
      CHECK(dot == doctest::Approx(r == s ? 1.0 : 0.0).epsilon(1e-9));
    }
  }
  // Output head uses the small gain; biases start at zero.
  const Linear& head = net.layers[1];
  double head_norm = 0.0;
  for (int c = 0; c < 8; ++c) head_norm += head.w[c] * head.w[c];
  CHECK(std::sqrt(head_norm) == doctest::Approx(0.01).epsilon(1e-9));
  for (double b : l.b) CHECK(b == 0.0);
  for (double b : head.b) CHECK(b == 0.0);
}

TEST_CASE("forward computes a hand-checked two-layer network") {
  Mlp net;
  Linear h{2, 2, {1.0, 0.0, 0.0, 1.0}, {0.5, -0.5}};
  Linear o{2, 1, {2.0, 3.0}, {0.25}};
  net.layers = {h, o};
  std::vector<double> y = forward(net, {0.1, 0.2});
  double a0 = std::tanh(0.6), a1 = std::tanh(-0.3);
  CHECK(y.size() == 1);
  CHECK(y[0] == doctest::Approx(2.0 * a0 + 3.0 * a1 + 0.25).epsilon(1e-12));
  CHECK_THROWS_AS(forward(net, {0.1, 0.2, 0.3}), NnError);
}

TEST_CASE("backward matches central differences on random shapes") {
  Rng rng = make_rng(2, "test-backprop");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  struct Shape {
    int in;
    std::vector<int> hidden;
    int out;
  };
  std::vector<Shape> shapes = {
      {3, {4}, 2}, {5, {8, 8}, 7}, {2, {3, 3, 3}, 1}, {10, {16}, 12}};
  for (const Shape& sh : shapes) {
    Mlp net = make_mlp(sh.in, sh.hidden, sh.out, rng, 1.0);
    std::vector<double> x(sh.in), og(sh.out);
    for (double& v : x) v = u(rng);
    for (double& v : og) v = u(rng);

    ForwardCache cache;
    forward(net, x, &cache);
    MlpGrads grads = make_grads(net);
    backward(net, cache, og, grads);

    for (std::size_t li = 0; li < net.layers.size(); ++li) {
      Linear& l = net.layers[li];
      for (std::size_t j = 0; j < l.w.size(); j += 3) {
        double num = numeric_grad(net, x, og, l.w[j]);
        CHECK(grads.layers[li].w[j] == doctest::Approx(num).epsilon(1e-5));
      }
      for (std::size_t j = 0; j < l.b.size(); ++j) {
        double num = numeric_grad(net, x, og, l.b[j]);
        CHECK(grads.layers[li].b[j] == doctest::Approx(num).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("backward accumulates across samples") {
  Rng rng = make_rng(3, "test-accum");
  Mlp net = make_mlp(4, {6}, 2, rng, 1.0);
  std::vector<double> x1 = {0.1, -0.2, 0.3, 0.4};
  std::vector<double> x2 = {-0.5, 0.6, 0.7, -0.8};
  std::vector<double> og = {1.0, -1.0};

  MlpGrads both = make_grads(net);
  ForwardCache c;
  forward(net, x1, &c);
  backward(net, c, og, both);
  forward(net, x2, &c);
  backward(net, c, og, both);

  MlpGrads g1 = make_grads(net), g2 = make_grads(net);
  forward(net, x1, &c);
  backward(net, c, og, g1);
  forward(net, x2, &c);
  backward(net, c, og, g2);
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    for (std::size_t j = 0; j < both.layers[li].w.size(); ++j) {
      CHECK(both.layers[li].w[j] ==
            doctest::Approx(g1.layers[li].w[j] + g2.layers[li].w[j]));
    }
  }
}

TEST_CASE("adam first step moves every parameter by about the lr") {
  Rng rng = make_rng(4, "test-adam");
  Mlp net = make_mlp(3, {4}, 2, rng, 1.0);
  Mlp before = net;
  MlpGrads grads = make_grads(net);
  ForwardCache c;
  forward(net, {0.3, -0.1, 0.5}, &c);
  backward(net, c, {1.0, 1.0}, grads);
  AdamState st = make_adam(net);
  adam_step(net, grads, 1e-3, st);
  CHECK(st.t == 1);
  // With bias correction, step 1 is lr * g / (|g| + eps) ~ lr * sign(g).
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    for (std::size_t j = 0; j < net.layers[li].w.size(); ++j) {
      double g = grads.layers[li].w[j];
      double moved = net.layers[li].w[j] - before.layers[li].w[j];
      if (std::abs(g) > 1e-6) {
        CHECK(moved == doctest::Approx(-1e-3 * (g > 0 ? 1.0 : -1.0))
                           .epsilon(1e-3));
      }
    }
  }
}

TEST_CASE("adam with zero gradients leaves parameters untouched") {
  Rng rng = make_rng(5, "test-adam0");
  Mlp net = make_mlp(3, {4}, 2, rng, 1.0);
  Mlp before = net;
  MlpGrads grads = make_grads(net);
  AdamState st = make_adam(net);
  adam_step(net, grads, 1e-2, st);
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    for (std::size_t j = 0; j < net.layers[li].w.size(); ++j) {
      CHECK(net.layers[li].w[j] == before.layers[li].w[j]);
    }
  }
}

TEST_CASE("gradient clipping rescales to the requested norm") {
  Rng rng = make_rng(6, "test-clip");
  Mlp net = make_mlp(3, {4}, 2, rng, 1.0);
  MlpGrads grads = make_grads(net);
  for (Linear& l : grads.layers) {
    for (double& g : l.w) g = 1.0;
    for (double& g : l.b) g = 1.0;
  }
  double n0 = grad_norm(grads);
  CHECK(n0 == doctest::Approx(std::sqrt(static_cast<double>(
                  net.param_count()))));
  clip_grad_norm(grads, 0.5);
  CHECK(grad_norm(grads) == doctest::Approx(0.5).epsilon(1e-12));
  MlpGrads small = make_grads(net);
  small.layers[0].w[0] = 0.1;
  clip_grad_norm(small, 0.5);
  CHECK(small.layers[0].w[0] == doctest::Approx(0.1));
}

TEST_CASE("softmax, sampling, and the factored policy heads") {
  double logits[3] = {0.0, 0.0, 0.0};
  auto p = softmax(logits, 3);
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0));

  double shifted[3] = {1000.0, 1000.0, 999.0};  // max-shift avoids overflow
  auto q = softmax(shifted, 3);
  CHECK(q[0] == doctest::Approx(q[1]));
  CHECK(q[0] > q[2]);
  CHECK(q[0] + q[1] + q[2] == doctest::Approx(1.0));

  // Sampling frequencies converge on the softmax probabilities.
  Rng rng = make_rng(7, "test-sample");
  double biased[3] = {std::log(0.7), std::log(0.2), std::log(0.1)};
  int counts[3] = {0, 0, 0};
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[sample_categorical(biased, 3, rng).index];
  CHECK(std::abs(counts[0] / static_cast<double>(n) - 0.7) < 0.01);
  CHECK(std::abs(counts[1] / static_cast<double>(n) - 0.2) < 0.01);

  HeadSample hs = sample_categorical(biased, 3, rng);
  auto probs = softmax(biased, 3);
  CHECK(hs.logprob == doctest::Approx(std::log(probs[hs.index])));
  double ent = -(0.7 * std::log(0.7) + 0.2 * std::log(0.2) + 0.1 * std::log(0.1));
  CHECK(hs.entropy == doctest::Approx(ent).epsilon(1e-9));

  // Joint policy sample: logprob and entropy add across the two heads.
  std::vector<double> joint(kPolicyLogits, 0.0);
  PolicySample ps = sample_policy(joint, rng);
  CHECK(ps.logprob == doctest::Approx(std::log(1.0 / 3.0) + std::log(0.25)));
  CHECK(ps.entropy == doctest::Approx(std::log(3.0) + std::log(4.0)));
  PolicyEval pe = eval_policy(joint, ps.antenna_idx, ps.sleep_idx);
  CHECK(pe.logprob == doctest::Approx(ps.logprob));
  CHECK(pe.entropy == doctest::Approx(ps.entropy));
}

TEST_CASE("checkpoints round trip bit-exactly and reject corruption") {
  Rng rng = make_rng(8, "test-ckpt");
  Mlp a = make_mlp(12, {16, 16}, 7, rng, 0.01);
  Mlp b = make_mlp(20, {32}, 1, rng, 1.0);
  std::string path = "/tmp/cfes_test.ckpt";
  save_checkpoint(path, "mappo", "{\"rng_seed\":1}", {a, b});

  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.kind == "mappo");
  CHECK(ck.config_echo == "{\"rng_seed\":1}");
  REQUIRE(ck.nets.size() == 2);
  REQUIRE(ck.nets[0].layers.size() == a.layers.size());
  for (std::size_t li = 0; li < a.layers.size(); ++li) {
    CHECK(ck.nets[0].layers[li].w == a.layers[li].w);
    CHECK(ck.nets[0].layers[li].b == a.layers[li].b);
  }

  CHECK_THROWS_AS(load_checkpoint("/nonexistent.ckpt"), NnError);
  {
    std::ofstream bad(path, std::ios::binary);
    bad << "not a checkpoint at all";
  }
  CHECK_THROWS_AS(load_checkpoint(path), NnError);
  std::remove(path.c_str());
}
