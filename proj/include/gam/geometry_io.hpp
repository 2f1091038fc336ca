#pragma once

#include <string>

#include "gam/geometry.hpp"

namespace gam {

// Whitespace-separated XYZ text, one point per line. Blank lines and
// #-comments are skipped.
PointCloud load_cloud_xyz(const std::string& path);
void save_cloud_xyz(const PointCloud& cloud, const std::string& path);

// OFF meshes: "OFF" header, counts line, vertex lines, triangle faces.
MeshRef load_mesh_off(const std::string& path);
void save_mesh_off(const MeshRef& mesh, const std::string& path);

}  // namespace gam
