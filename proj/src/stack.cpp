#include "nspda/stack.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nspda {

ActionVec arbitrate_action(const std::vector<double>& raw, const ActionVec& quantized) {
  if (raw.size() != quantized.size()) {
    throw std::invalid_argument("arbitrate_action: length mismatch");
  }
  int nonzero = 0;
  for (int q : quantized) nonzero += (q != 0);
  if (nonzero <= 1) return quantized;

  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t i = 0; i < quantized.size(); ++i) {
    if (quantized[i] == 0) continue;
    const double mag = std::fabs(raw[i]);
    if (mag > best_mag) {  // strict: ties keep the lowest index
      best_mag = mag;
      best = i;
    }
  }
  ActionVec out(quantized.size(), 0);
  out[best] = quantized[best];
  return out;
}

std::optional<char> apply_action(DigitalStack& stack, const ActionVec& action,
                                 const Alphabet& alphabet) {
  if (static_cast<int>(action.size()) != alphabet.size()) {
    throw std::invalid_argument("apply_action: action length mismatch");
  }
  int idx = -1;
  for (std::size_t i = 0; i < action.size(); ++i) {
    if (action[i] != 0) {
      if (idx >= 0) throw std::invalid_argument("apply_action: action not arbitrated");
      idx = static_cast<int>(i);
    }
  }
  if (idx < 0) return std::nullopt;  // no-op

  if (action[static_cast<std::size_t>(idx)] > 0) {
    stack.items.push_back(alphabet.symbol(idx));
    return std::nullopt;
  }
  // pop
  if (stack.depth() == 1) {
    stack.illegal_pop = true;  // only the bottom symbol remains
    return std::nullopt;
  }
  const char popped = stack.top();
  stack.items.pop_back();
  if (popped != alphabet.symbol(idx)) stack.illegal_pop = true;
  return popped;
}

namespace {

double draw(double lo, double hi, ReadMode mode, Rng& rng) {
  switch (mode) {
    case ReadMode::sample:
      return rng.uniform(lo, hi);
    case ReadMode::midpoint:
      return 0.5 * (lo + hi);
    case ReadMode::low_edge:
      return lo;
    case ReadMode::high_edge:
      return hi;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

int read_slot(char symbol, const Alphabet& alphabet) {
  return symbol == kBottom ? alphabet.size() : alphabet.index(symbol);
}

ReadVec read_stack(const DigitalStack& stack, std::optional<char> just_popped,
                   const Alphabet& alphabet, ReadMode mode, Rng& rng) {
  const int slots = alphabet.size() + 1;
  const int top = read_slot(stack.top(), alphabet);
  const int popped = just_popped ? read_slot(*just_popped, alphabet) : -1;
  ReadVec r(static_cast<std::size_t>(slots));
  for (int k = 0; k < slots; ++k) {
    double lo = kAlpha1Lo, hi = kAlpha1Hi;
    if (k == top) {
      lo = kAlpha2Lo;
      hi = kAlpha2Hi;
    } else if (k == popped) {
      lo = kAlpha3Lo;
      hi = kAlpha3Hi;
    }
    r[static_cast<std::size_t>(k)] = draw(lo, hi, mode, rng);
  }
  return r;
}

char decode_top(const ReadVec& read, const Alphabet& alphabet) {
  int top = -1;
  for (std::size_t k = 0; k < read.size(); ++k) {
    if (read[k] >= kAlpha2Lo && read[k] <= kAlpha2Hi) {
      if (top >= 0) throw std::logic_error("decode_top: two components read high");
      top = static_cast<int>(k);
    }
  }
  if (top < 0) throw std::logic_error("decode_top: no component reads high");
  return top == alphabet.size() ? kBottom : alphabet.symbol(top);
}

std::string trace_line(int t, const ActionVec& action, const DigitalStack& stack,
                       const ReadVec& read, const Alphabet& alphabet) {
  std::ostringstream os;
  os << "t=" << t << " action=";
  int idx = -1;
  for (std::size_t i = 0; i < action.size(); ++i) {
    if (action[i] != 0) idx = static_cast<int>(i);
  }
  if (idx < 0) {
    os << "noop";
  } else {
    os << (action[static_cast<std::size_t>(idx)] > 0 ? "push:" : "pop:")
       << alphabet.symbol(idx);
  }
  os << " stack=" << stack.items << " read=";
  for (std::size_t k = 0; k < read.size(); ++k) {
    const double v = read[k];
    char band = '?';
    if (v >= kAlpha1Lo && v <= kAlpha1Hi) band = '1';
    if (v >= kAlpha3Lo && v <= kAlpha3Hi) band = '3';
    if (v >= kAlpha2Lo && v <= kAlpha2Hi) band = '2';
    os << band;
  }
  if (stack.illegal_pop) os << " illegal_pop";
  return os.str();
}

}  // namespace nspda
