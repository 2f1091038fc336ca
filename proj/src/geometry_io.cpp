#include "gam/geometry_io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "gam/errors.hpp"

namespace gam {

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
    throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

bool skippable(const std::string& line) {
    for (char c : line) {
        if (c == '#') return true;
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.precision(17);
    return out;
}

}  // namespace

PointCloud load_cloud_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    PointCloud cloud;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (skippable(line)) continue;
        std::istringstream ss(line);
        Vec3 p;
        if (!(ss >> p.x >> p.y >> p.z)) parse_fail(path, lineno, "expected three coordinates");
        std::string extra;
        if (ss >> extra) parse_fail(path, lineno, "trailing token '" + extra + "'");
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            parse_fail(path, lineno, "non-finite coordinate");
        cloud.points.push_back(p);
    }
    if (cloud.points.empty()) throw ParseError(path + ": no points");
    return cloud;
}

void save_cloud_xyz(const PointCloud& cloud, const std::string& path) {
    std::ofstream out = open_out(path);
    for (const Vec3& p : cloud.points) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
    if (!out) throw IoError("write failed: " + path);
}

MeshRef load_mesh_off(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    int lineno = 0;
    auto next_content_line = [&]() -> std::string {
        while (std::getline(in, line)) {
            ++lineno;
            if (!skippable(line)) return line;
        }
        parse_fail(path, lineno, "unexpected end of file");
    };
    std::string header = next_content_line();
    {
        std::istringstream ss(header);
        std::string tag;
        ss >> tag;
        if (tag != "OFF") parse_fail(path, lineno, "expected OFF header, got '" + tag + "'");
    }
    int nv = 0, nf = 0, ne = 0;
    {
        std::istringstream ss(next_content_line());
        if (!(ss >> nv >> nf)) parse_fail(path, lineno, "expected vertex/face counts");
        ss >> ne;  // edge count is optional and ignored
        if (nv <= 0 || nf < 0) parse_fail(path, lineno, "nonpositive counts");
    }
    MeshRef mesh;
    mesh.cloud.points.reserve(nv);
    for (int i = 0; i < nv; ++i) {
        std::istringstream ss(next_content_line());
        Vec3 p;
        if (!(ss >> p.x >> p.y >> p.z)) parse_fail(path, lineno, "expected vertex coordinates");
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            parse_fail(path, lineno, "non-finite coordinate");
        mesh.cloud.points.push_back(p);
    }
    mesh.triangles.reserve(nf);
    for (int i = 0; i < nf; ++i) {
        std::istringstream ss(next_content_line());
        int arity = 0;
        if (!(ss >> arity)) parse_fail(path, lineno, "expected face arity");
        if (arity != 3) parse_fail(path, lineno, "only triangle faces are supported");
        std::array<int, 3> tri{};
        if (!(ss >> tri[0] >> tri[1] >> tri[2])) parse_fail(path, lineno, "expected three indices");
        for (int v : tri)
            if (v < 0 || v >= nv) parse_fail(path, lineno, "vertex index out of range");
        mesh.triangles.push_back(tri);
    }
    return mesh;
}

void save_mesh_off(const MeshRef& mesh, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "OFF\n" << mesh.cloud.size() << ' ' << mesh.triangles.size() << " 0\n";
    for (const Vec3& p : mesh.cloud.points) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
    for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace gam
