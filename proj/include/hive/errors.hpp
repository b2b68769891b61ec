#pragma once

#include <stdexcept>
#include <string>

namespace hive {

/// Malformed input data (map files, scenario files, rosters).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A point or unit reference outside the world.
class OutOfBoundsError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Lookup of something that does not exist (scenario, session, unit).
class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A command that the target's current state does not allow.
class ConflictError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hive
