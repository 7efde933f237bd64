#pragma once

#include <stdexcept>
#include <string>

namespace medcbr {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: manifest rows, config fields, score files.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A keyed lookup (guideline, cache entry, report) found nothing.
class LookupError : public Error {
 public:
  using Error::Error;
};

// Metric requested on data where it is not defined (e.g. single class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// On-disk state that exists but cannot be trusted.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

// A protocol step was invoked out of order.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Transient failure talking to an external generation client.
class RetryableError : public Error {
 public:
  RetryableError(std::string sample_id, const std::string& what)
      : Error(what), sample_id_(std::move(sample_id)) {}
  const std::string& sample_id() const noexcept { return sample_id_; }

 private:
  std::string sample_id_;
};

}  // namespace medcbr
