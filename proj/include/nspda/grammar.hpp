#pragma once

#include <string>
#include <vector>

namespace nspda {

// Tokens and stack symbols are single characters.
inline constexpr char kBottom = '$';    // initial stack symbol, never popped
inline constexpr char kEpsilon = '\0';  // input-free transition marker

class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::string symbols);

  int size() const { return static_cast<int>(symbols_.size()); }
  char symbol(int i) const;
  int index(char c) const;  // throws std::invalid_argument on unknown symbol
  bool contains(char c) const;
  const std::string& symbols() const { return symbols_; }

  bool operator==(const Alphabet&) const = default;

 private:
  std::string symbols_;
};

// Normal-form stack effect of a transition; every builtin machine uses one of
// these three per step. The generic simulator also accepts arbitrary
// replacement strings.
enum class StackOp { push, pop, noop, other };

struct Transition {
  int from = 0;
  char input = kEpsilon;  // kEpsilon = input-free move
  char top = kBottom;     // required top of stack
  int to = 0;
  // Written in place of `top`; front() ends up on top. "" = pop,
  // {top} = no-op, {c, top} = push c.
  std::string replace;

  StackOp op() const;
  char pushed() const;  // valid when op() == push
};

// The 7-tuple. State 0 is the start state. Acceptance: input consumed, state
// in `accepting`, stack reduced to [kBottom].
struct PdaSpec {
  std::string name;
  std::vector<std::string> states;
  Alphabet input_alphabet;
  std::string stack_alphabet;  // includes kBottom
  std::vector<Transition> transitions;
  std::vector<int> accepting;

  int state_count() const { return static_cast<int>(states.size()); }  // M
  bool is_accepting(int s) const;
  void validate() const;  // throws std::invalid_argument on a malformed tuple
};

// The five benchmark machines:
//   palindrome  w c w^R over {a,b}, w nonempty          (M = 6)
//   anbn        a^n b^n, n >= 1                          (M = 4)
//   anbncbmam   a^n b^n c b^m a^m, n,m >= 1              (M = 8)
//   anmbncm     a^(n+m) b^n c^m, n,m >= 1                (M = 5)
//   dyck2       balanced nonempty strings over ()[]      (M = 4)
// Each is written in acceptance-normal form: deterministic in
// (state, input, top), one stack symbol moved per step, and accepting states
// reachable only with the stack reduced to [kBottom]. M is minimal for this
// form; the first processed token is absorbed into the state so that the
// final token can observe the emptied stack.
PdaSpec builtin_grammar(const std::string& name);
const std::vector<std::string>& builtin_grammar_names();

// Breadth-first search over the epsilon-closure of machine configurations,
// with visited pruning and stack depth bounded by |tokens| + 1. Handles
// nondeterministic machines and arbitrary replacement strings.
bool pda_accepts(const PdaSpec& spec, const std::string& tokens);

// Independent membership oracle: direct counting/reversal/bracket-matching
// predicates, no PDA machinery. `name` must identify a builtin grammar.
bool closed_form_member(const std::string& name, const std::string& tokens);

}  // namespace nspda
