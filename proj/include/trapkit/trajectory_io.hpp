// JSONL persistence for trajectories.
//
// One trajectory per line.  The writer is canonical: fixed field order,
// floating-point values at 9 significant digits, so two writes of the same
// trajectory are byte-identical and write(read(write(T))) == write(T).

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trapkit/trajectory.hpp"

namespace trapkit {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Canonical number format used across all emitted files ("%.9g", -0 folded).
std::string format_number(double value);

std::string to_jsonl_line(const Trajectory& traj);
Trajectory trajectory_from_jsonl_line(const std::string& line);

// Writes one record per line; returns the number of records written.
std::size_t write_trajectories(const std::string& path, std::span<const Trajectory> trajs);

// Reads all records, validating invariants.  Errors cite the 1-based line.
std::vector<Trajectory> read_trajectories(const std::string& path);

}  // namespace trapkit
