#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mswf/characteristics.hpp"
#include "mswf/grid.hpp"
#include "mswf/potentials.hpp"

namespace mswf {

/// Binary layout: "WFGF", u16 version = 1, u16 n, per axis (u64 M, f64 L), then
/// M^n little-endian (f64 re, f64 im) pairs in row-major order.
void write_wfgf(const std::filesystem::path& path, const GridFunction& f);
GridFunction read_wfgf(const std::filesystem::path& path);

/// Columns index..., x..., re, im; one row per node.
std::string grid_csv(const GridFunction& f);

/// Columns s, x..., xi..., h, RePsi, ImPsi at every accepted step, followed by the
/// accumulated phase int_{t0}^s Psi as RePhase, ImPhase.
std::string trajectory_csv(const VectorPotentialModel& model, const FlowResult& r);

/// Columns t, l2.
std::string probe_csv(const std::vector<std::pair<double, double>>& probe);

/// Writes text, creating parent directories. Input error when the file cannot be written.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace mswf
