#include "nspda/grammar.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>
#include <unordered_set>

namespace nspda {

Alphabet::Alphabet(std::string symbols) : symbols_(std::move(symbols)) {
  if (symbols_.size() < 2) {
    throw std::invalid_argument("alphabet needs at least two symbols");
  }
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    for (std::size_t j = i + 1; j < symbols_.size(); ++j) {
      if (symbols_[i] == symbols_[j]) {
        throw std::invalid_argument("alphabet symbols must be distinct");
      }
    }
  }
}

char Alphabet::symbol(int i) const {
  if (i < 0 || i >= size()) throw std::invalid_argument("symbol index out of range");
  return symbols_[static_cast<std::size_t>(i)];
}

int Alphabet::index(char c) const {
  const auto pos = symbols_.find(c);
  if (pos == std::string::npos) {
    throw std::invalid_argument(std::string("symbol not in alphabet: '") + c + "'");
  }
  return static_cast<int>(pos);
}

bool Alphabet::contains(char c) const { return symbols_.find(c) != std::string::npos; }

StackOp Transition::op() const {
  if (replace.empty()) return StackOp::pop;
  if (replace.size() == 1 && replace[0] == top) return StackOp::noop;
  if (replace.size() == 2 && replace[1] == top) return StackOp::push;
  return StackOp::other;
}

char Transition::pushed() const {
  if (op() != StackOp::push) throw std::logic_error("transition does not push");
  return replace[0];
}

bool PdaSpec::is_accepting(int s) const {
  return std::find(accepting.begin(), accepting.end(), s) != accepting.end();
}

void PdaSpec::validate() const {
  const int m = state_count();
  if (m < 1) throw std::invalid_argument("machine needs at least one state");
  if (stack_alphabet.find(kBottom) == std::string::npos) {
    throw std::invalid_argument("stack alphabet must contain the bottom symbol");
  }
  for (int s : accepting) {
    if (s < 0 || s >= m) throw std::invalid_argument("accepting state out of range");
  }
  for (const Transition& t : transitions) {
    if (t.from < 0 || t.from >= m || t.to < 0 || t.to >= m) {
      throw std::invalid_argument("transition endpoint out of range");
    }
    if (t.input != kEpsilon && !input_alphabet.contains(t.input)) {
      throw std::invalid_argument("transition input not in alphabet");
    }
    if (stack_alphabet.find(t.top) == std::string::npos) {
      throw std::invalid_argument("transition top not in stack alphabet");
    }
    for (char c : t.replace) {
      if (stack_alphabet.find(c) == std::string::npos) {
        throw std::invalid_argument("replacement symbol not in stack alphabet");
      }
    }
    if (t.top == kBottom && t.op() == StackOp::pop) {
      throw std::invalid_argument("transition would pop the bottom symbol");
    }
  }
}

namespace {

Transition tr(int from, char input, char top, int to, std::string replace) {
  return Transition{from, input, top, to, std::move(replace)};
}

std::string push_of(char c, char top) { return std::string{c, top}; }
std::string noop_of(char top) { return std::string{top}; }

PdaSpec make_anbn() {
  PdaSpec p;
  p.name = "anbn";
  p.states = {"q0", "qa", "qb", "qf"};
  p.input_alphabet = Alphabet("ab");
  p.stack_alphabet = std::string{kBottom} + "ab";
  // The first 'a' is absorbed into the state, so n a's leave n-1 symbols on
  // the stack and the final 'b' arrives with the stack already empty.
  p.transitions = {
      tr(0, 'a', kBottom, 1, noop_of(kBottom)),
      tr(1, 'a', kBottom, 1, push_of('a', kBottom)),
      tr(1, 'a', 'a', 1, push_of('a', 'a')),
      tr(1, 'b', 'a', 2, ""),
      tr(1, 'b', kBottom, 3, noop_of(kBottom)),  // n = 1
      tr(2, 'b', 'a', 2, ""),
      tr(2, 'b', kBottom, 3, noop_of(kBottom)),
  };
  p.accepting = {3};
  return p;
}

PdaSpec make_palindrome() {
  PdaSpec p;
  p.name = "palindrome";
  p.states = {"q0", "pa", "pb", "ra", "rb", "qf"};
  p.input_alphabet = Alphabet("abc");
  p.stack_alphabet = std::string{kBottom} + "ab";
  // w c w^R: the first symbol of w is kept in the state (branch pa/pb), the
  // rest of w is pushed, and after the center marker the reversal is matched
  // by popping; the final symbol must equal the remembered one with the stack
  // already empty.
  auto branch = [&](int push_state, int pop_state, char first) {
    std::vector<Transition> ts;
    ts.push_back(tr(0, first, kBottom, push_state, noop_of(kBottom)));
    for (char sym : {'a', 'b'}) {
      for (char top : {kBottom, 'a', 'b'}) {
        ts.push_back(tr(push_state, sym, top, push_state, push_of(sym, top)));
      }
    }
    for (char top : {kBottom, 'a', 'b'}) {
      ts.push_back(tr(push_state, 'c', top, pop_state, noop_of(top)));
    }
    ts.push_back(tr(pop_state, 'a', 'a', pop_state, ""));
    ts.push_back(tr(pop_state, 'b', 'b', pop_state, ""));
    ts.push_back(tr(pop_state, first, kBottom, 5, noop_of(kBottom)));
    return ts;
  };
  for (auto& t : branch(1, 3, 'a')) p.transitions.push_back(t);
  for (auto& t : branch(2, 4, 'b')) p.transitions.push_back(t);
  p.accepting = {5};
  return p;
}

PdaSpec make_anbncbmam() {
  PdaSpec p;
  p.name = "anbncbmam";
  p.states = {"q0", "qa", "qb", "qm", "qc", "qd", "qe", "qf"};
  p.input_alphabet = Alphabet("abc");
  p.stack_alphabet = std::string{kBottom} + "ab";
  p.transitions = {
      tr(0, 'a', kBottom, 1, noop_of(kBottom)),
      tr(1, 'a', kBottom, 1, push_of('a', kBottom)),
      tr(1, 'a', 'a', 1, push_of('a', 'a')),
      tr(1, 'b', 'a', 2, ""),
      tr(1, 'b', kBottom, 3, noop_of(kBottom)),  // n = 1
      tr(2, 'b', 'a', 2, ""),
      tr(2, 'b', kBottom, 3, noop_of(kBottom)),
      tr(3, 'c', kBottom, 4, noop_of(kBottom)),
      tr(4, 'b', kBottom, 5, noop_of(kBottom)),
      tr(5, 'b', kBottom, 5, push_of('b', kBottom)),
      tr(5, 'b', 'b', 5, push_of('b', 'b')),
      tr(5, 'a', 'b', 6, ""),
      tr(5, 'a', kBottom, 7, noop_of(kBottom)),  // m = 1
      tr(6, 'a', 'b', 6, ""),
      tr(6, 'a', kBottom, 7, noop_of(kBottom)),
  };
  p.accepting = {7};
  return p;
}

PdaSpec make_anmbncm() {
  PdaSpec p;
  p.name = "anmbncm";
  p.states = {"q0", "qa", "qb", "qc", "qf"};
  p.input_alphabet = Alphabet("abc");
  p.stack_alphabet = std::string{kBottom} + "abc";
  p.transitions = {
      tr(0, 'a', kBottom, 1, noop_of(kBottom)),
      tr(1, 'a', kBottom, 1, push_of('a', kBottom)),
      tr(1, 'a', 'a', 1, push_of('a', 'a')),
      tr(1, 'b', 'a', 2, ""),  // n+m >= 2, so the first 'b' always sees an 'a'
      tr(2, 'b', 'a', 2, ""),
      tr(2, 'c', 'a', 3, ""),
      tr(2, 'c', kBottom, 4, noop_of(kBottom)),  // m = 1
      tr(3, 'c', 'a', 3, ""),
      tr(3, 'c', kBottom, 4, noop_of(kBottom)),
  };
  p.accepting = {4};
  return p;
}

PdaSpec make_dyck2() {
  PdaSpec p;
  p.name = "dyck2";
  p.states = {"q0", "dp", "dq", "qf"};
  p.input_alphabet = Alphabet("()[]");
  p.stack_alphabet = std::string{kBottom} + "()[]";
  // The first opener is kept in the state (dp for '(', dq for '['); its
  // matching closer arrives with the stack empty and transitions to qf, from
  // which a fresh balanced block may start again.
  auto branch = [&](int state, char closer) {
    std::vector<Transition> ts;
    for (char opener : {'(', '['}) {
      for (char top : {kBottom, '(', '['}) {
        ts.push_back(tr(state, opener, top, state, push_of(opener, top)));
      }
    }
    ts.push_back(tr(state, ')', '(', state, ""));
    ts.push_back(tr(state, ']', '[', state, ""));
    ts.push_back(tr(state, closer, kBottom, 3, noop_of(kBottom)));
    return ts;
  };
  p.transitions.push_back(tr(0, '(', kBottom, 1, noop_of(kBottom)));
  p.transitions.push_back(tr(0, '[', kBottom, 2, noop_of(kBottom)));
  for (auto& t : branch(1, ')')) p.transitions.push_back(t);
  for (auto& t : branch(2, ']')) p.transitions.push_back(t);
  p.transitions.push_back(tr(3, '(', kBottom, 1, noop_of(kBottom)));
  p.transitions.push_back(tr(3, '[', kBottom, 2, noop_of(kBottom)));
  p.accepting = {3};
  return p;
}

}  // namespace

const std::vector<std::string>& builtin_grammar_names() {
  static const std::vector<std::string> names = {"palindrome", "anbn", "anbncbmam",
                                                 "anmbncm", "dyck2"};
  return names;
}

PdaSpec builtin_grammar(const std::string& name) {
  PdaSpec p;
  if (name == "anbn") {
    p = make_anbn();
  } else if (name == "palindrome") {
    p = make_palindrome();
  } else if (name == "anbncbmam") {
    p = make_anbncbmam();
  } else if (name == "anmbncm") {
    p = make_anmbncm();
  } else if (name == "dyck2") {
    p = make_dyck2();
  } else {
    throw std::invalid_argument("unknown grammar: " + name);
  }
  p.validate();
  return p;
}

bool pda_accepts(const PdaSpec& spec, const std::string& tokens) {
  for (char c : tokens) {
    if (!spec.input_alphabet.contains(c)) {
      throw std::invalid_argument(std::string("token not in alphabet: '") + c + "'");
    }
  }

  struct Config {
    int state;
    std::size_t pos;
    std::string stack;  // bottom at front, top at back
  };

  const std::size_t depth_bound = tokens.size() + 1;
  std::deque<Config> frontier;
  std::unordered_set<std::string> seen;

  auto key_of = [](const Config& c) {
    return std::to_string(c.state) + '|' + std::to_string(c.pos) + '|' + c.stack;
  };
  auto enqueue = [&](Config c) {
    if (c.stack.size() > depth_bound) return;
    auto key = key_of(c);
    if (seen.insert(std::move(key)).second) frontier.push_back(std::move(c));
  };

  enqueue(Config{0, 0, std::string{kBottom}});

  while (!frontier.empty()) {
    Config c = std::move(frontier.front());
    frontier.pop_front();

    if (c.pos == tokens.size() && spec.is_accepting(c.state) &&
        c.stack.size() == 1) {
      return true;
    }

    const char top = c.stack.back();
    for (const Transition& t : spec.transitions) {
      if (t.from != c.state || t.top != top) continue;
      const bool is_eps = (t.input == kEpsilon);
      if (!is_eps && (c.pos >= tokens.size() || tokens[c.pos] != t.input)) continue;

      Config next;
      next.state = t.to;
      next.pos = c.pos + (is_eps ? 0 : 1);
      next.stack = c.stack;
      next.stack.pop_back();
      for (auto it = t.replace.rbegin(); it != t.replace.rend(); ++it) {
        next.stack.push_back(*it);
      }
      if (next.stack.empty()) continue;  // bottom must survive
      enqueue(std::move(next));
    }
  }
  return false;
}

namespace {

bool member_anbn(const std::string& s) {
  const std::size_t n = s.size();
  if (n < 2 || n % 2 != 0) return false;
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < half; ++i) {
    if (s[i] != 'a') return false;
  }
  for (std::size_t i = half; i < n; ++i) {
    if (s[i] != 'b') return false;
  }
  return true;
}

bool member_palindrome(const std::string& s) {
  const std::size_t n = s.size();
  if (n < 3 || n % 2 == 0) return false;
  const std::size_t mid = n / 2;
  if (s[mid] != 'c') return false;
  for (std::size_t i = 0; i < mid; ++i) {
    const char c = s[i];
    if (c != 'a' && c != 'b') return false;
    if (s[n - 1 - i] != c) return false;
  }
  return true;
}

bool member_anbncbmam(const std::string& s) {
  std::size_t i = 0;
  auto run = [&](char c) {
    std::size_t k = 0;
    while (i < s.size() && s[i] == c) {
      ++i;
      ++k;
    }
    return k;
  };
  const std::size_t n = run('a');
  const std::size_t n2 = run('b');
  if (i >= s.size() || s[i] != 'c') return false;
  ++i;
  const std::size_t m = run('b');
  const std::size_t m2 = run('a');
  return i == s.size() && n >= 1 && n == n2 && m >= 1 && m == m2;
}

bool member_anmbncm(const std::string& s) {
  std::size_t i = 0;
  auto run = [&](char c) {
    std::size_t k = 0;
    while (i < s.size() && s[i] == c) {
      ++i;
      ++k;
    }
    return k;
  };
  const std::size_t a = run('a');
  const std::size_t n = run('b');
  const std::size_t m = run('c');
  return i == s.size() && n >= 1 && m >= 1 && a == n + m;
}

bool member_dyck2(const std::string& s) {
  if (s.empty()) return false;
  std::string open;
  for (char c : s) {
    switch (c) {
      case '(':
      case '[':
        open.push_back(c);
        break;
      case ')':
        if (open.empty() || open.back() != '(') return false;
        open.pop_back();
        break;
      case ']':
        if (open.empty() || open.back() != '[') return false;
        open.pop_back();
        break;
      default:
        return false;
    }
  }
  return open.empty();
}

}  // namespace

bool closed_form_member(const std::string& name, const std::string& tokens) {
  if (name == "anbn") return member_anbn(tokens);
  if (name == "palindrome") return member_palindrome(tokens);
  if (name == "anbncbmam") return member_anbncbmam(tokens);
  if (name == "anmbncm") return member_anmbncm(tokens);
  if (name == "dyck2") return member_dyck2(tokens);
  throw std::invalid_argument("unknown grammar: " + name);
}

}  // namespace nspda
