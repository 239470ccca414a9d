#pragma once

#include <stdexcept>
#include <string>

namespace nspda {

// J too small for the automaton being programmed, or a Jacobian over the
// configured memory cap.
class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// Dataset generation could not reach the requested counts within the
// oversampling budget.
class GenerationExhausted : public std::runtime_error {
 public:
  explicit GenerationExhausted(const std::string& what) : std::runtime_error(what) {}
};

// Unreadable or version-mismatched checkpoint file.
class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nspda
