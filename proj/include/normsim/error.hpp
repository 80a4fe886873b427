#pragma once

#include <stdexcept>
#include <string>

namespace normsim {

/// A caller violated an operation's precondition (bad argument, bad config value).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two models or sequences that must agree in size do not.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An EM component lost (almost) all responsibility mass.
class DegenerateComponent : public std::runtime_error {
 public:
  DegenerateComponent(std::size_t index, double mass)
      : std::runtime_error("component " + std::to_string(index) +
                           " has responsibility mass " + std::to_string(mass)),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// A state-action record lacks something the predicate needs.
class MalformedRecord : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The observed action is not part of the candidate action set.
class UnknownAction : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw PreconditionError(what);
}

}  // namespace normsim
