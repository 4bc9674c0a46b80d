#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace sensorcdn {

using NodeId = std::uint32_t;
using SensorId = std::uint32_t;

/// Simulated time and durations, in seconds.
using Seconds = double;

/// Rates in bits per second.
using BitsPerSecond = double;

using Bytes = std::uint64_t;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class QueryError : public Error {
 public:
  using Error::Error;
};

class OrderingError : public Error {
 public:
  using Error::Error;
};

class DataIntegrityError : public Error {
 public:
  using Error::Error;
};

class CapabilityError : public Error {
 public:
  using Error::Error;
};

class ExpiredError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

class AccountingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ScheduleError : public Error {
 public:
  using Error::Error;
};

/// Fixed-point rendering used by every CSV writer so outputs diff cleanly.
inline std::string format_fixed(double v, int digits = 9) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace sensorcdn
