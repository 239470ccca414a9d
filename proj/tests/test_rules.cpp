#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <set>

#include "nspda/dataset.hpp"
#include "nspda/errors.hpp"
#include "nspda/learning.hpp"
#include "nspda/rules.hpp"

using namespace nspda;

namespace {

void for_all_strings(const std::string& sigma, int max_len,
                     const std::function<void(const std::string&)>& fn) {
  std::string buf;
  std::function<void(int)> rec = [&](int remaining) {
    if (!buf.empty()) fn(buf);
    if (remaining == 0) return;
    for (char c : sigma) {
      buf.push_back(c);
      rec(remaining - 1);
      buf.pop_back();
    }
  };
  rec(max_len);
}

std::set<std::size_t> nonzero_cells(const ModelParams& p) {
  std::set<std::size_t> cells;
  for (std::size_t i = 0; i < p.W_s.size(); ++i) {
    if (p.W_s[i] != 0.0) cells.insert(i);
  }
  const std::size_t off_a = p.W_s.size();
  for (std::size_t i = 0; i < p.W_a.size(); ++i) {
    if (p.W_a[i] != 0.0) cells.insert(off_a + i);
  }
  const std::size_t off_o = off_a + p.W_a.size();
  for (std::size_t i = 0; i < p.W_o.size(); ++i) {
    if (p.W_o[i] != 0.0) cells.insert(off_o + i);
  }
  return cells;
}

ModelParams zeroed(ModelOrder order, int J, int L) {
  ModelParams p = init_params(order, J, L, 0);
  std::fill(p.W_s.begin(), p.W_s.end(), 0.0);
  std::fill(p.W_a.begin(), p.W_a.end(), 0.0);
  std::fill(p.W_o.begin(), p.W_o.end(), 0.0);
  return p;
}

}  // namespace

TEST_CASE("state assignment is leftmost-first and guarded") {
  const PdaSpec pda = builtin_grammar("anbn");  // M = 4
  const StateAssignment a = assign_states(pda, 6);
  CHECK(a.neuron_of(0) == 0);
  CHECK(a.neuron_of(3) == 3);
  CHECK_THROWS_AS(a.neuron_of(4), std::invalid_argument);
  CHECK_THROWS_AS(assign_states(pda, 4), CapacityError);
  CHECK_THROWS_AS(assign_states(pda, 3), CapacityError);
}

TEST_CASE("programming one transition writes the expected cells") {
  // Self-loop push transition on a two-state machine: the target entry is
  // +H, the action entry +1, and no self-inhibition is written for a loop.
  PdaSpec pda;
  pda.name = "loop";
  pda.states = {"q0", "q1"};
  pda.input_alphabet = Alphabet("ab");
  pda.stack_alphabet = std::string{kBottom} + "ab";
  pda.transitions = {
      {0, 'a', kBottom, 0, std::string{'a', kBottom}},  // (q0,a,bottom)->(q0, push a)
      {0, 'b', 'a', 1, ""},                             // (q0,b,a)->(q1, pop)
  };
  pda.accepting = {1};
  pda.validate();

  ModelParams p = zeroed(ModelOrder::third, 3, 2);
  const StateAssignment assign = assign_states(pda, 3);
  const int k_bottom = 2, l_a = 0, l_b = 1, k_a = 0;

  program_transition(p, assign, pda, pda.transitions[0], 6.0);
  CHECK(p.ws(0, p.col3(0, k_bottom, l_a)) == 6.0);
  CHECK(p.wa(l_a, p.col3(0, k_bottom, l_a)) == 1.0);
  CHECK(p.b_s[0] == kProgramBias);
  // a self-loop gets no inhibition entry anywhere else
  int nonzero = 0;
  for (double w : p.W_s) nonzero += (w != 0.0);
  CHECK(nonzero == 1);

  program_transition(p, assign, pda, pda.transitions[1], 6.0);
  CHECK(p.ws(1, p.col3(0, k_a, l_b)) == 6.0);
  CHECK(p.ws(0, p.col3(0, k_a, l_b)) == -6.0);  // source inhibited
  CHECK(p.wa(l_a, p.col3(0, k_a, l_b)) == -1.0);  // pop indexed by the popped symbol

  // programming is idempotent
  const ModelParams snapshot = p;
  program_transition(p, assign, pda, pda.transitions[1], 6.0);
  CHECK(p.W_s == snapshot.W_s);
  CHECK(p.W_a == snapshot.W_a);
}

TEST_CASE("programmed strengths survive discretization") {
  const PdaSpec pda = builtin_grammar("anbn");
  const ModelParams prog = program_full(pda, ModelOrder::third, 6);
  const ModelParams q = quantize_weights(prog);
  for (std::size_t i = 0; i < prog.W_s.size(); ++i) {
    if (prog.W_s[i] == kProgramStrength) CHECK(q.W_s[i] == 1.0);
    if (prog.W_s[i] == -kProgramStrength) CHECK(q.W_s[i] == 0.0);
    if (prog.W_s[i] == 0.0) CHECK(q.W_s[i] == 0.0);
  }
  for (std::size_t i = 0; i < prog.W_a.size(); ++i) {
    CHECK(q.W_a[i] == prog.W_a[i]);  // already ternary
  }
}

TEST_CASE("acceptance head: signs, bias, and decision margins") {
  const PdaSpec pda = builtin_grammar("anbn");  // accepting state 3 of 4
  ModelParams p = zeroed(ModelOrder::third, 6, 2);
  program_acceptance(p, assign_states(pda, 6), pda, 6.0);
  CHECK(p.W_o == std::vector<double>{-6, -6, -6, 6, 0, 0});
  CHECK(p.b_o == -3.0);
  // one-hot at the accepting neuron: sigmoid(theta/2) > 0.5
  CHECK(g_hat(6.0 - 3.0) > 0.5);
  // one-hot at a rejecting neuron: sigmoid(-3 theta / 2) < 0.5
  CHECK(g_hat(-6.0 - 3.0) < 0.5);
  // dead state: sigmoid(-theta/2) < 0.5
  CHECK(g_hat(-3.0) < 0.5);
}

TEST_CASE("full programming matches the automaton on every short string") {
  for (const auto& name : builtin_grammar_names()) {
    const PdaSpec pda = builtin_grammar(name);
    const ModelParams prog = program_full(pda, ModelOrder::third, pda.state_count() + 2);
    Rng rng(23);
    const int max_len = pda.input_alphabet.size() >= 4 ? 6 : 8;
    for_all_strings(pda.input_alphabet.symbols(), max_len, [&](const std::string& s) {
      const bool want = pda_accepts(pda, s);
      const bool got =
          classify_tokens(prog, s, pda.input_alphabet, ReadMode::sample, rng);
      if (want != got) FAIL("programmed mismatch for ", name, " on '", s, "'");
    });
  }
}

TEST_CASE("full programming held on sampled long strings") {
  for (const auto& name : builtin_grammar_names()) {
    const PdaSpec pda = builtin_grammar(name);
    const ModelParams prog = program_full(pda, ModelOrder::third, pda.state_count() + 3);
    const Dataset ev = sample_dataset(pda, 60, 60, 60, 60, 77);
    Rng rng(31);
    for (const auto& s : ev.samples) {
      const bool want = pda_accepts(pda, s.tokens);
      const bool got =
          classify_tokens(prog, s.tokens, pda.input_alphabet, ReadMode::sample, rng);
      if (want != got) FAIL("programmed long mismatch for ", name, " on '", s.tokens, "'");
    }
  }
}

TEST_CASE("quantized view of a programmed machine is exactly the rule pattern") {
  const PdaSpec pda = builtin_grammar("dyck2");
  const ModelParams q = quantize_weights(program_full(pda, ModelOrder::third, 6));
  for (double w : q.W_s) CHECK((w == 0.0 || w == 1.0));
  for (double w : q.W_a) CHECK((w == -1.0 || w == 0.0 || w == 1.0));
}

TEST_CASE("programmed tensors are sparse") {
  for (const auto& name : builtin_grammar_names()) {
    const PdaSpec pda = builtin_grammar(name);
    const ModelParams prog = program_full(pda, ModelOrder::third, pda.state_count() + 2);
    long long nonzero = 0;
    for (double w : prog.W_s) nonzero += (w != 0.0);
    CHECK(nonzero <= 2 * static_cast<long long>(pda.transitions.size()));
  }
}

TEST_CASE("hint levels grow monotonically") {
  const PdaSpec pda = builtin_grammar("anbn");
  ModelParams h1 = zeroed(ModelOrder::third, 6, 2);
  ModelParams h2 = zeroed(ModelOrder::third, 6, 2);
  ModelParams full = zeroed(ModelOrder::third, 6, 2);
  insert_hints(h1, pda, HintLevel::hint1);
  insert_hints(h2, pda, HintLevel::hint2);
  insert_hints(full, pda, HintLevel::full);

  const auto c1 = nonzero_cells(h1);
  const auto c2 = nonzero_cells(h2);
  const auto cf = nonzero_cells(full);
  CHECK(c1.size() < c2.size());
  CHECK(c2.size() < cf.size());
  CHECK(std::includes(c2.begin(), c2.end(), c1.begin(), c1.end()));
  CHECK(std::includes(cf.begin(), cf.end(), c2.begin(), c2.end()));

  // hint1 touches only the output head
  ModelParams probe = zeroed(ModelOrder::third, 6, 2);
  insert_hints(probe, pda, HintLevel::hint1);
  for (double w : probe.W_s) CHECK(w == 0.0);
  CHECK_THROWS_AS(insert_hints(probe, pda, HintLevel::none), std::invalid_argument);
}

TEST_CASE("hints overwrite programmed cells but keep everything trainable") {
  const PdaSpec pda = builtin_grammar("anbn");
  ModelParams p = init_params(ModelOrder::third, 6, 2, 55);
  const ModelParams before = p;
  insert_hints(p, pda, HintLevel::hint2);
  CHECK(p.W_s != before.W_s);  // entries written

  // a synthetic gradient step moves every tensor, programmed cells included
  GradientBundle g;
  g.W_s.assign(p.W_s.size(), 1.0);
  g.b_s.assign(p.b_s.size(), 1.0);
  g.W_a.assign(p.W_a.size(), 1.0);
  g.b_a.assign(p.b_a.size(), 1.0);
  g.W_o.assign(p.W_o.size(), 1.0);
  g.b_o = 1.0;
  OptimizerConfig opt;
  opt.lr_mode = LrMode::fixed;
  Rng rng(1);
  const ModelParams frozen = p;
  sgd_step(p, g, opt, 0, rng);
  for (std::size_t i = 0; i < p.W_s.size(); ++i) CHECK(p.W_s[i] != frozen.W_s[i]);
}

TEST_CASE("hinted transition sets per level") {
  const PdaSpec pda = builtin_grammar("anbn");
  CHECK(hinted_transitions(pda, HintLevel::none).empty());
  CHECK(hinted_transitions(pda, HintLevel::hint1).empty());
  const auto h2 = hinted_transitions(pda, HintLevel::hint2);
  for (int idx : h2) CHECK(pda.transitions[static_cast<std::size_t>(idx)].from == 0);
  CHECK(h2.size() == 1);  // one transition out of the start state
  CHECK(hinted_transitions(pda, HintLevel::full).size() == pda.transitions.size());
}

TEST_CASE("hint masks follow the deterministic walk") {
  const PdaSpec pda = builtin_grammar("anbn");

  const auto none = hint_mask(pda, {}, "aabb");
  CHECK(none == std::vector<int>{0, 0, 0, 0});
  CHECK(refine_schedule(none, 4) == std::vector<int>{4, 4, 4, 4});

  const auto full = hint_mask(pda, hinted_transitions(pda, HintLevel::full), "aabb");
  CHECK(full == std::vector<int>{1, 1, 1, 1});
  CHECK(refine_schedule(full, 4) == std::vector<int>{1, 1, 1, 1});

  const auto h2 = hint_mask(pda, hinted_transitions(pda, HintLevel::hint2), "aabb");
  CHECK(h2 == std::vector<int>{1, 0, 0, 0});  // only the start transition is hinted

  // a stuck walk leaves the tail unhinted
  const auto dead = hint_mask(pda, hinted_transitions(pda, HintLevel::full), "abab");
  CHECK(dead == std::vector<int>{1, 1, 0, 0});

  CHECK_THROWS_AS(hint_mask(pda, {}, "xyz"), std::invalid_argument);
}

TEST_CASE("second-order programming uses the split-accepting construction") {
  const PdaSpec pda = builtin_grammar("anbn");  // M=4, |F|=1, L=2
  const int J = 16;
  const ModelParams prog = program_full(pda, ModelOrder::second, J);
  // split neurons occupy the first free slots after the assigned states
  int accepting_units = 0;
  for (double w : prog.W_o) accepting_units += (w > 0.0);
  CHECK(accepting_units == pda.input_alphabet.size() + 1);  // one per top symbol
  CHECK(prog.W_o[3] == 0.0);  // base accepting neuron moved off the head
  CHECK(prog.b_o == -3.0);
  CHECK_THROWS_AS(program_full(pda, ModelOrder::second, 5), CapacityError);
}
