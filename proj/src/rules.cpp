#include "nspda/rules.hpp"

#include <stdexcept>
#include <unordered_set>

#include "nspda/errors.hpp"

namespace nspda {

HintLevel hint_from_string(const std::string& s) {
  if (s == "none") return HintLevel::none;
  if (s == "hint1") return HintLevel::hint1;
  if (s == "hint2") return HintLevel::hint2;
  if (s == "full") return HintLevel::full;
  throw std::invalid_argument("unknown hint level: " + s);
}

std::string to_string(HintLevel level) {
  switch (level) {
    case HintLevel::none:
      return "none";
    case HintLevel::hint1:
      return "hint1";
    case HintLevel::hint2:
      return "hint2";
    case HintLevel::full:
      return "full";
  }
  return "none";
}

int StateAssignment::neuron_of(int state) const {
  if (state < 0 || state >= M) throw std::invalid_argument("unassigned machine state");
  return state;
}

StateAssignment assign_states(const PdaSpec& pda, int J) {
  const int M = pda.state_count();
  if (J <= M) {
    throw CapacityError("need J > M to program " + std::to_string(M) +
                        " states into " + std::to_string(J) + " neurons");
  }
  return StateAssignment{M, J};
}

void program_transition(ModelParams& params, const StateAssignment& assignment,
                        const PdaSpec& pda, const Transition& t, double strength) {
  if (t.input == kEpsilon) {
    throw std::invalid_argument("cannot program an input-free transition");
  }
  const Alphabet& ab = pda.input_alphabet;
  const int from = assignment.neuron_of(t.from);
  const int to = assignment.neuron_of(t.to);
  const int l = ab.index(t.input);
  const int k = read_slot(t.top, ab);

  int col;
  if (params.order == ModelOrder::third) {
    col = params.col3(from, k, l);
  } else {
    col = params.col2_input(from, l);
    params.ws(to, params.col2_read(from, k)) = strength;
  }
  params.ws(to, col) = strength;
  if (from != to) params.ws(from, col) = -strength;
  params.b_s[static_cast<std::size_t>(to)] = kProgramBias;
  params.b_s[static_cast<std::size_t>(from)] = kProgramBias;

  switch (t.op()) {
    case StackOp::push:
      params.wa(ab.index(t.pushed()), col) = 1.0;
      break;
    case StackOp::pop:
      if (t.top == kBottom) throw std::invalid_argument("transition pops the bottom");
      params.wa(ab.index(t.top), col) = -1.0;
      break;
    case StackOp::noop:
      break;
    case StackOp::other:
      throw std::invalid_argument(
          "only single-symbol push/pop/no-op transitions are programmable");
  }
}

void program_acceptance(ModelParams& params, const StateAssignment& assignment,
                        const PdaSpec& pda, double strength) {
  for (int m = 0; m < assignment.M; ++m) {
    params.W_o[static_cast<std::size_t>(assignment.neuron_of(m))] =
        pda.is_accepting(m) ? strength : -strength;
  }
  params.b_o = -strength / 2.0;
}

namespace {

void zero_params(ModelParams& p) {
  std::fill(p.W_s.begin(), p.W_s.end(), 0.0);
  std::fill(p.W_a.begin(), p.W_a.end(), 0.0);
  std::fill(p.b_s.begin(), p.b_s.end(), 0.0);
  std::fill(p.b_a.begin(), p.b_a.end(), 0.0);
  std::fill(p.W_o.begin(), p.W_o.end(), 0.0);
  p.b_o = 0.0;
}

// Split-accepting construction for second-order machines: neuron per
// (accepting state, top symbol) firing on input-slot + read-slot conjunction.
void program_second_order_splits(ModelParams& params, const StateAssignment& assignment,
                                 const PdaSpec& pda, double strength) {
  const Alphabet& ab = pda.input_alphabet;
  const int slots = params.read_dim();
  int next_free = assignment.M;
  const int needed = static_cast<int>(pda.accepting.size()) * slots;
  if (assignment.J < assignment.M + needed) {
    throw CapacityError("second-order split construction needs J >= " +
                        std::to_string(assignment.M + needed));
  }
  for (int acc : pda.accepting) {
    params.W_o[static_cast<std::size_t>(assignment.neuron_of(acc))] = 0.0;
    for (int k = 0; k < slots; ++k) {
      const int split = next_free++;
      for (const Transition& t : pda.transitions) {
        if (t.to != acc || t.input == kEpsilon) continue;
        const int from = assignment.neuron_of(t.from);
        params.ws(split, params.col2_input(from, ab.index(t.input))) = strength;
        params.ws(split, params.col2_read(from, k)) = strength;
      }
      params.b_s[static_cast<std::size_t>(split)] = -1.5;
      params.W_o[static_cast<std::size_t>(split)] = strength;
    }
  }
}

}  // namespace

ModelParams program_full(const PdaSpec& pda, ModelOrder order, int J, double strength) {
  const StateAssignment assignment = assign_states(pda, J);
  ModelParams params = init_params(order, J, pda.input_alphabet.size(), 0);
  zero_params(params);
  for (const Transition& t : pda.transitions) {
    program_transition(params, assignment, pda, t, strength);
  }
  program_acceptance(params, assignment, pda, strength);
  if (order == ModelOrder::second) {
    program_second_order_splits(params, assignment, pda, strength);
  }
  return params;
}

void insert_hints(ModelParams& params, const PdaSpec& pda, HintLevel level,
                  double strength) {
  if (level == HintLevel::none) {
    throw std::invalid_argument("insert_hints: level must not be none");
  }
  const StateAssignment assignment = assign_states(pda, params.J);
  program_acceptance(params, assignment, pda, strength);
  if (level == HintLevel::hint1) return;
  for (const Transition& t : pda.transitions) {
    if (level == HintLevel::hint2 && t.from != 0) continue;
    program_transition(params, assignment, pda, t, strength);
  }
}

std::vector<int> hinted_transitions(const PdaSpec& pda, HintLevel level) {
  std::vector<int> out;
  if (level == HintLevel::none || level == HintLevel::hint1) return out;
  for (std::size_t i = 0; i < pda.transitions.size(); ++i) {
    if (level == HintLevel::full || pda.transitions[i].from == 0) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

std::vector<int> hint_mask(const PdaSpec& pda, const std::vector<int>& hinted,
                           const std::string& tokens) {
  for (char c : tokens) {
    if (!pda.input_alphabet.contains(c)) {
      throw std::invalid_argument(std::string("token not in alphabet: '") + c + "'");
    }
  }
  const std::unordered_set<int> hintset(hinted.begin(), hinted.end());
  std::vector<int> h(tokens.size(), 0);
  int state = 0;
  std::string stack{kBottom};
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    int chosen = -1;
    for (std::size_t i = 0; i < pda.transitions.size(); ++i) {
      const Transition& tr = pda.transitions[i];
      if (tr.from == state && tr.input == tokens[t] && tr.top == stack.back()) {
        chosen = static_cast<int>(i);
        break;
      }
    }
    if (chosen < 0) break;  // stuck: the rest of the mask stays 0
    const Transition& tr = pda.transitions[static_cast<std::size_t>(chosen)];
    stack.pop_back();
    for (auto it = tr.replace.rbegin(); it != tr.replace.rend(); ++it) {
      stack.push_back(*it);
    }
    state = tr.to;
    h[t] = hintset.count(chosen) ? 1 : 0;
  }
  return h;
}

}  // namespace nspda
