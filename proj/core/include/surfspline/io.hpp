#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "surfspline/mesh.hpp"
#include "surfspline/metric.hpp"

namespace surfspline {

/// ASCII OFF with triangular faces only. Errors carry the 1-based line number.
TriangleMesh read_off(const std::filesystem::path& path, Chart chart = {});
void write_off(const TriangleMesh& mesh, const std::filesystem::path& path);

/// Chart sidecar: `# chart=spherical|cylindrical`, then `vertex_index,u,v` rows.
Chart read_chart(const std::filesystem::path& path, std::size_t num_vertices);
void write_chart(const TriangleMesh& mesh, const std::filesystem::path& path);

/// OFF mesh plus an optional chart sidecar.
TriangleMesh load_mesh(const std::filesystem::path& off, const std::optional<std::filesystem::path>& chart = {});

/// Observation CSV; the header `node_index,value` or `x,y,z,value` selects the mode.
/// tau is not stored in the file and is left at 0.
Observations read_observations(const std::filesystem::path& path);
void write_observations(const Observations& obs, const std::filesystem::path& path);

/// Per-node metric CSV `vertex_index,delta,rho1,rho2`; every vertex must appear once.
MetricField read_metric(const std::filesystem::path& path, std::size_t num_vertices);
void write_metric(const std::vector<AnisotropyParams>& params, const std::filesystem::path& path);

/// `vertex_index,prediction`.
void write_predictions(const Eigen::VectorXd& values, const std::filesystem::path& path);
Eigen::VectorXd read_predictions(const std::filesystem::path& path);

} // namespace surfspline
