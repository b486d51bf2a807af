#pragma once

#include <stdexcept>
#include <string>

namespace uolens {

// Invalid user-supplied configuration (bad horizons, violated constant
// constraints, empty active sets, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A solve failed to converge or an input made it ill-posed (broken root
// bracket, singular metric, non-convergent binary search).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Bregman-divergence support violation: positive mass where the reference
// point carries none.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// predict/update called out of order on a session.
struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// The observed scale pruned every learning rate; only the restart wrapper
// can recover from this.
struct RangeError : std::runtime_error {
    explicit RangeError(const std::string& what) : std::runtime_error(what) {}
};

// Requested statistic or operation is not supported for this object kind.
struct CapabilityError : std::runtime_error {
    explicit CapabilityError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace uolens
