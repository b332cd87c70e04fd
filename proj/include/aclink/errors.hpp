#pragma once

#include <stdexcept>
#include <string>

namespace aclink {

/// Invalid physical or numerical argument (non-positive L, C, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Configuration failed to parse or violates a ConverterParams invariant.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Base of all faults raised while a simulation is running. Carries the
/// simulated time at which the fault happened.
class SimulationFault : public std::runtime_error {
public:
    SimulationFault(const std::string& what, double t) : std::runtime_error(what), time_(t) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Integrator produced a non-finite state (step too large or model blow-up).
class NonFiniteState : public SimulationFault {
public:
    using SimulationFault::SimulationFault;
};

/// A sequencer guard was not reached within the allowed link-cycle duration.
class GuardTimeout : public SimulationFault {
public:
    using SimulationFault::SimulationFault;
};

class DegenerateReference : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class AllZeroReference : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DegenerateSystem : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoFundamental : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; the message names the offending line.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace aclink
