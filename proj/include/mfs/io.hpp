#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mfs/analysis.hpp"
#include "mfs/geometry.hpp"
#include "mfs/solvers.hpp"

namespace mfs {

using Json = nlohmann::ordered_json;

/// Shortest text that reads back to the same double (17 significant digits).
std::string format_double(double v);

Json shape_to_json(const Shape& shape);
Shape shape_from_json(const Json& j);

/// Cluster file: shapes, poses and discretizations; nodes are regenerated on read.
Json cluster_to_json(const Cluster& cluster);
Cluster cluster_from_json(const Json& j);
void write_cluster(const std::filesystem::path& path, const Cluster& cluster);
Cluster read_cluster(const std::filesystem::path& path);

Json report_to_json(const SolveReport& report);
SolveReport report_from_json(const Json& j);

/// Solution file: problem kind, cluster, per-body strengths, surface values and outputs.
Json solution_to_json(const Solution& solution, const Cluster& cluster);
struct LoadedSolution {
  Solution solution;
  Cluster cluster;
};
LoadedSolution solution_from_json(const Json& j);
void write_solution(const std::filesystem::path& path, const Solution& solution, const Cluster& cluster);
LoadedSolution read_solution(const std::filesystem::path& path);

/// body,node,x,y,z followed by one column per strength component.
void write_strengths_csv(const std::filesystem::path& path, const Solution& solution, const Cluster& cluster);

void write_convergence_csv(const std::filesystem::path& path, const ConvergenceRecord& record);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace mfs
