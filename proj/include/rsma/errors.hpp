#ifndef RSMA_ERRORS_HPP_
#define RSMA_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace rsma {

// Argument and precondition failures use std::invalid_argument directly.
// The types below mark failure modes callers are expected to tell apart.

class DegenerateChannelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidActionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EpisodeFinishedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a loss or gradient goes non-finite. Training runs abort.
class TrainingDivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rsma

#endif  // RSMA_ERRORS_HPP_
