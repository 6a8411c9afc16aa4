#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "varexp/mesh.hpp"

namespace testing {

inline varexp::Field random_field(const varexp::GridPtr& grid, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    varexp::Field f(grid);
    for (int d = 0; d < grid->dof_count(); ++d) {
        f[static_cast<std::size_t>(grid->dof_node(d))] = dist(rng);
    }
    return f;
}

inline varexp::GridPtr default_grid(int n = 201) { return varexp::Grid::build(varexp::DomainSpec{}, n); }

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("varexp_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testing
