#pragma once

#include <string>
#include <vector>

#include "nspda/grammar.hpp"
#include "nspda/model.hpp"

namespace nspda {

enum class HintLevel { none, hint1, hint2, full };

HintLevel hint_from_string(const std::string& s);
std::string to_string(HintLevel level);

// Injective map from machine states to state neurons, leftmost first:
// state m occupies neuron m, surplus neurons stay free.
struct StateAssignment {
  int M = 0;
  int J = 0;
  int neuron_of(int state) const;  // throws on unassigned state
};

// Requires J > M.
StateAssignment assign_states(const PdaSpec& pda, int J);

inline constexpr double kProgramStrength = 6.0;  // H and theta
// Bias separating a high read component from interval noise once the state
// tensor is quantized to {0,1}.
inline constexpr double kProgramBias = -0.5;

// Compiles one transition: +H toward the target neuron at the (from, top,
// input) coordinate, -H on the source's self-entry (skipped for self-loops),
// target/source biases set to kProgramBias, and the stack operation written
// into the action tensor as +-1. Second-order models are programmed on the
// concatenated coordinates: the input slot drives the transition and the read
// slot of the required top is co-programmed.
void program_transition(ModelParams& params, const StateAssignment& assignment,
                        const PdaSpec& pda, const Transition& transition,
                        double strength);

// Output head: +theta for accepting neurons, -theta for assigned
// non-accepting neurons, untouched surplus, bias -theta/2.
void program_acceptance(ModelParams& params, const StateAssignment& assignment,
                        const PdaSpec& pda, double strength);

// Zero-initialized tensors with every transition and the acceptance head
// programmed. A third-order programmed machine reproduces the automaton
// exactly under quantized evaluation. The second order cannot condition a
// transition on input and stack top jointly, so it gets the split-accepting
// construction: one extra neuron per (accepting state, top symbol) pair that
// fires on the conjunction of an incoming transition's input slot and that
// top's read slot; base accepting neurons stay off the output head.
ModelParams program_full(const PdaSpec& pda, ModelOrder order, int J,
                         double strength = kProgramStrength);

// Partial knowledge on top of existing (e.g. randomly initialized) weights:
// hint1 programs the acceptance head, hint2 additionally the transitions out
// of the start state, full the whole transition set. Programmed entries stay
// trainable.
void insert_hints(ModelParams& params, const PdaSpec& pda, HintLevel level,
                  double strength = kProgramStrength);

// Transition indices considered "known" at a hint level.
std::vector<int> hinted_transitions(const PdaSpec& pda, HintLevel level);

// Binary hint sequence for a token string: simulate the machine
// deterministically (first applicable transition); h_t = 1 when the
// transition used at step t is hinted, 0 otherwise and from the first stuck
// step onward.
std::vector<int> hint_mask(const PdaSpec& pda, const std::vector<int>& hinted,
                           const std::string& tokens);

}  // namespace nspda
