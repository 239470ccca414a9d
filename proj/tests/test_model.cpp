#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "nspda/dataset.hpp"
#include "nspda/learning.hpp"
#include "nspda/model.hpp"
#include "nspda/rules.hpp"

using namespace nspda;

TEST_CASE("initialization: shapes, range, determinism") {
  const ModelParams third = init_params(ModelOrder::third, 4, 2, 1);
  // read vector carries L+1 slots (one per symbol plus the bottom marker)
  CHECK(third.W_s.size() == 4u * 4u * 3u * 2u);
  CHECK(third.W_a.size() == 2u * 4u * 3u * 2u);
  CHECK(third.b_s.size() == 4u);
  CHECK(third.b_a.size() == 2u);
  CHECK(third.W_o.size() == 4u);
  for (double w : third.W_s) {
    CHECK(w > -0.1);
    CHECK(w < 0.1);
  }
  for (double b : third.b_s) CHECK(b == 0.0);
  CHECK(third.b_o == 0.0);

  const ModelParams second = init_params(ModelOrder::second, 4, 2, 1);
  CHECK(second.W_s.size() == 4u * 4u * 5u);  // concat (read slots + inputs) = 2L+1
  CHECK(second.W_a.size() == 2u * 4u * 5u);

  const ModelParams again = init_params(ModelOrder::third, 4, 2, 1);
  CHECK(again.W_s == third.W_s);
  CHECK(again.W_a == third.W_a);
  CHECK(again.W_o == third.W_o);

  CHECK_THROWS_AS(init_params(ModelOrder::third, 0, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(init_params(ModelOrder::third, 3, 1, 1), std::invalid_argument);
}

TEST_CASE("state-neuron sizing follows the order-specific surplus") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int j3 = size_state_count(ModelOrder::third, 2, rng);
    CHECK(j3 >= 4);
    CHECK(j3 <= 8);
    const int j2 = size_state_count(ModelOrder::second, 2, rng);
    CHECK(j2 >= 14);
    CHECK(j2 <= 31);
    const int j1 = size_state_count(ModelOrder::third, 1, rng);
    CHECK(j1 >= 3);
    CHECK(j1 <= 7);
  }
}

TEST_CASE("quantized activation thresholds sit exactly where printed") {
  CHECK(g_hat(0.0) == doctest::Approx(0.5));
  CHECK(g_quant(0.0) == 0.0);  // 0.5 is not > 0.5
  CHECK(g_quant(1e-9) == 1.0);
  CHECK(f_hat(0.0) == doctest::Approx(0.0));
  CHECK(f_quant(0.0) == 0);  // dead zone
  // thresholds on f_hat: +1 above 0.13, -1 below -0.09
  CHECK(f_quant(2.0 * 0.1400) == 1);   // f_hat ~ 0.139 > 0.13
  CHECK(f_quant(2.0 * 0.1200) == 0);
  CHECK(f_quant(-2.0 * 0.0850) == 0);  // f_hat ~ -0.0848 >= -0.09
  CHECK(f_quant(-2.0 * 0.1000) == -1);
}

TEST_CASE("one-hot contraction identity") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int J = 2 + static_cast<int>(rng.uniform_int(0, 4));
    const int L = 2 + static_cast<int>(rng.uniform_int(0, 2));
    const ModelParams p = init_params(ModelOrder::third, J, L, rng.next_u64());
    const int js = static_cast<int>(rng.index(static_cast<std::size_t>(J)));
    const int ks = static_cast<int>(rng.index(static_cast<std::size_t>(L + 1)));
    const int ls = static_cast<int>(rng.index(static_cast<std::size_t>(L)));
    std::vector<double> z(static_cast<std::size_t>(J), 0.0);
    z[static_cast<std::size_t>(js)] = 1.0;
    ReadVec r(static_cast<std::size_t>(L + 1), 0.0);
    r[static_cast<std::size_t>(ks)] = 1.0;
    std::vector<double> s, u;
    pre_activations(p, z, r, ls, s, u);
    for (int i = 0; i < J; ++i) {
      CHECK(s[static_cast<std::size_t>(i)] ==
            doctest::Approx(p.ws(i, p.col3(js, ks, ls)) + p.b_s[static_cast<std::size_t>(i)])
                .epsilon(1e-12));
    }
    for (int c = 0; c < L; ++c) {
      CHECK(u[static_cast<std::size_t>(c)] ==
            doctest::Approx(p.wa(c, p.col3(js, ks, ls)) + p.b_a[static_cast<std::size_t>(c)])
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("a second-order tensor embeds into the third order by replication") {
  Rng rng(13);
  const int J = 4, L = 3;
  ModelParams second = init_params(ModelOrder::second, J, L, 5);
  // zero the input block so the model is a pure function of (z, r)
  for (int j = 0; j < J; ++j) {
    for (int l = 0; l < L; ++l) {
      for (int i = 0; i < J; ++i) second.ws(i, second.col2_input(j, l)) = 0.0;
      for (int c = 0; c < L; ++c) second.wa(c, second.col2_input(j, l)) = 0.0;
    }
  }

  ModelParams third = init_params(ModelOrder::third, J, L, 6);
  third.b_s = second.b_s;
  third.b_a = second.b_a;
  for (int i = 0; i < J; ++i) {
    for (int j = 0; j < J; ++j) {
      for (int k = 0; k < L + 1; ++k) {
        for (int l = 0; l < L; ++l) {
          third.ws(i, third.col3(j, k, l)) = second.ws(i, second.col2_read(j, k));
        }
      }
    }
  }
  for (int c = 0; c < L; ++c) {
    for (int j = 0; j < J; ++j) {
      for (int k = 0; k < L + 1; ++k) {
        for (int l = 0; l < L; ++l) {
          third.wa(c, third.col3(j, k, l)) = second.wa(c, second.col2_read(j, k));
        }
      }
    }
  }

  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> z(static_cast<std::size_t>(J));
    ReadVec r(static_cast<std::size_t>(L + 1));
    for (auto& v : z) v = rng.uniform();
    for (auto& v : r) v = rng.uniform();
    const int token = static_cast<int>(rng.index(static_cast<std::size_t>(L)));
    std::vector<double> s2, u2, s3, u3;
    pre_activations(second, z, r, token, s2, u2);
    pre_activations(third, z, r, token, s3, u3);
    for (int i = 0; i < J; ++i) {
      CHECK(s3[static_cast<std::size_t>(i)] ==
            doctest::Approx(s2[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
    for (int c = 0; c < L; ++c) {
      CHECK(u3[static_cast<std::size_t>(c)] ==
            doctest::Approx(u2[static_cast<std::size_t>(c)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero weights: state dies, action is a no-op") {
  const Alphabet ab("ab");
  ModelParams p = init_params(ModelOrder::third, 3, 2, 1);
  std::fill(p.W_s.begin(), p.W_s.end(), 0.0);
  std::fill(p.W_a.begin(), p.W_a.end(), 0.0);
  Rng rng(2);
  ModelState st = init_state(p, ab, ReadMode::midpoint, rng);
  step(p, st, 0, StepMode::quantized_eval, ab, ReadMode::midpoint, rng);
  for (double zi : st.z) CHECK(zi == 0.0);  // g(0) = 0: 0.5 is not above threshold
  CHECK(st.stack.items == "$");             // f_hat(0) = 0 lies in the dead zone
  CHECK(st.last_action == ActionVec{0, 0});
}

TEST_CASE("forward_sequence: refinement repeats multiply predictions") {
  const Alphabet ab("ab");
  const ModelParams p = init_params(ModelOrder::third, 3, 2, 9);
  Rng rng(1);
  const std::vector<int> tokens = {0, 1, 0};

  auto r1 = forward_sequence(p, tokens, {1, 1, 1}, StepMode::smooth_train, ab,
                             ReadMode::sample, rng);
  CHECK(r1.predictions.size() == 3);
  auto r4 = forward_sequence(p, tokens, {4, 4, 4}, StepMode::smooth_train, ab,
                             ReadMode::sample, rng);
  CHECK(r4.predictions.size() == 12);
  auto rm = forward_sequence(p, tokens, {1, 4, 4}, StepMode::smooth_train, ab,
                             ReadMode::sample, rng);
  CHECK(rm.predictions.size() == 9);
  CHECK(rm.offsets == std::vector<int>{0, 1, 5});

  CHECK_THROWS_AS(forward_sequence(p, {}, {}, StepMode::smooth_train, ab,
                                   ReadMode::sample, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(forward_sequence(p, tokens, {1, 0, 1}, StepMode::smooth_train, ab,
                                   ReadMode::sample, rng),
                  std::invalid_argument);
}

TEST_CASE("weight discretization thresholds") {
  ModelParams p = init_params(ModelOrder::third, 2, 2, 3);
  p.W_s[0] = 0.51;
  p.W_s[1] = 0.5;
  p.W_s[2] = -0.2;
  p.W_a[0] = -0.6;
  p.W_a[1] = 0.49;
  p.W_a[2] = 0.7;
  p.W_o[0] = 0.77;
  p.b_s[0] = -0.5;
  const ModelParams q = quantize_weights(p);
  CHECK(q.W_s[0] == 1.0);
  CHECK(q.W_s[1] == 0.0);
  CHECK(q.W_s[2] == 0.0);
  CHECK(q.W_a[0] == -1.0);
  CHECK(q.W_a[1] == 0.0);
  CHECK(q.W_a[2] == 1.0);
  CHECK(q.W_o[0] == 0.77);   // output head keeps full precision
  CHECK(q.b_s[0] == -0.5);   // biases pass through

  const ModelParams qq = quantize_weights(q);
  CHECK(qq.W_s == q.W_s);  // idempotent
  CHECK(qq.W_a == q.W_a);
}

TEST_CASE("classification is total for untrained models") {
  const PdaSpec pda = builtin_grammar("dyck2");
  const ModelParams p = init_params(ModelOrder::third, 6, 4, 77);
  Rng rng(8);
  CHECK_NOTHROW(classify_tokens(p, "([])", pda.input_alphabet, ReadMode::sample, rng));
  CHECK_NOTHROW(classify_tokens(p, "(((((", pda.input_alphabet, ReadMode::sample, rng));
}

TEST_CASE("programmed machine walks its automaton exactly") {
  const PdaSpec pda = builtin_grammar("anbn");
  const ModelParams prog = program_full(pda, ModelOrder::third, 6);
  const ModelParams q = quantize_weights(prog);
  Rng rng(3);
  ModelState st = init_state(q, pda.input_alphabet, ReadMode::sample, rng);
  // "ab": a enters the counting state, b closes on the empty stack
  step(q, st, 0, StepMode::quantized_eval, pda.input_alphabet, ReadMode::sample, rng);
  CHECK(st.z == std::vector<double>{0, 1, 0, 0, 0, 0});
  const double yhat =
      step(q, st, 1, StepMode::quantized_eval, pda.input_alphabet, ReadMode::sample, rng);
  CHECK(st.z == std::vector<double>{0, 0, 0, 1, 0, 0});  // accepting state, one-hot
  CHECK(yhat > 0.5);
}

TEST_CASE("quantized evaluation at midpoints is deterministic") {
  const PdaSpec pda = builtin_grammar("dyck2");
  const ModelParams p = init_params(ModelOrder::third, 6, 4, 123);
  Rng r1(1), r2(999);  // generator must not matter at midpoints
  for (const std::string s : {"([])", "()", "((((", "[]()[]"}) {
    CHECK(classify_tokens(p, s, pda.input_alphabet, ReadMode::midpoint, r1) ==
          classify_tokens(p, s, pda.input_alphabet, ReadMode::midpoint, r2));
  }
}

TEST_CASE("programmed classification is invariant across the read intervals") {
  for (const auto& name : {"anbn", "dyck2", "palindrome"}) {
    const PdaSpec pda = builtin_grammar(name);
    const ModelParams prog = program_full(pda, ModelOrder::third, pda.state_count() + 2);
    const Dataset probe = sample_dataset(pda, 40, 40, 1, 14, 5);
    Rng rng(17);
    for (const auto& s : probe.samples) {
      const bool mid =
          classify_tokens(prog, s.tokens, pda.input_alphabet, ReadMode::midpoint, rng);
      const bool lo =
          classify_tokens(prog, s.tokens, pda.input_alphabet, ReadMode::low_edge, rng);
      const bool hi =
          classify_tokens(prog, s.tokens, pda.input_alphabet, ReadMode::high_edge, rng);
      const bool sampled =
          classify_tokens(prog, s.tokens, pda.input_alphabet, ReadMode::sample, rng);
      CHECK(mid == (s.label == 1));
      CHECK(lo == mid);
      CHECK(hi == mid);
      CHECK(sampled == mid);
    }
  }
}

TEST_CASE("checkpoints reload bit-identically") {
  namespace fs = std::filesystem;
  const PdaSpec pda = builtin_grammar("anbncbmam");
  const ModelParams p = init_params(ModelOrder::third, 10, 3, 31337);
  const std::string path = (fs::temp_directory_path() / "nspda_test.ckpt").string();
  save_model(path, p, {{"seed", "31337"}, {"grammar", "anbncbmam"}});

  const auto [back, meta] = load_model(path);
  CHECK(meta.at("seed") == "31337");
  CHECK(back.order == p.order);
  CHECK(back.J == p.J);
  CHECK(back.L == p.L);
  CHECK(back.W_s == p.W_s);  // exact, not approximate
  CHECK(back.W_a == p.W_a);
  CHECK(back.b_s == p.b_s);
  CHECK(back.b_a == p.b_a);
  CHECK(back.W_o == p.W_o);
  CHECK(back.b_o == p.b_o);

  const Dataset probe = sample_dataset(pda, 30, 30, 1, 15, 2);
  Rng r1(4), r2(4);
  for (const auto& s : probe.samples) {
    CHECK(classify_tokens(p, s.tokens, pda.input_alphabet, ReadMode::midpoint, r1) ==
          classify_tokens(back, s.tokens, pda.input_alphabet, ReadMode::midpoint, r2));
  }
  fs::remove(path);
}

TEST_CASE("the cell forward and the model forward agree") {
  const PdaSpec pda = builtin_grammar("anmbncm");
  const Alphabet& ab = pda.input_alphabet;
  const ModelParams p = init_params(ModelOrder::third, 5, 3, 404);
  const std::vector<int> tokens = to_indices("aabc", ab);
  const std::vector<int> schedule = {1, 4, 2, 1};

  Rng r1(9);
  const auto fwd =
      forward_sequence(p, tokens, schedule, StepMode::smooth_train, ab, ReadMode::midpoint, r1);
  const double direct = refinement_loss(fwd.predictions, 1, schedule);

  Rng r2(9);
  const double via_cell = nspda_sequence_loss(p, ab, tokens, 1, schedule,
                                              ReadMode::midpoint, r2);
  CHECK(via_cell == doctest::Approx(direct).epsilon(1e-12));

  const ModelParams p2 = init_params(ModelOrder::second, 5, 3, 405);
  Rng r3(9), r4(9);
  const auto fwd2 =
      forward_sequence(p2, tokens, schedule, StepMode::smooth_train, ab, ReadMode::midpoint, r3);
  CHECK(nspda_sequence_loss(p2, ab, tokens, 0, schedule, ReadMode::midpoint, r4) ==
        doctest::Approx(refinement_loss(fwd2.predictions, 0, schedule)).epsilon(1e-12));
}
