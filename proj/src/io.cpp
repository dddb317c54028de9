#include "hjb/io.hpp"

#include "hjb/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace hjb {

void write_field_csv(const ScalarField& f, std::ostream& os) {
    const Grid& g = *f.grid;
    char buf[128];
    os << "x1,x2,mask,value\n";
    for (Index k = 0; k < g.size(); ++k) {
        const Point x = g.point(k);
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%s,%.17g\n", x[0], x[1], to_string(g.mask(k)).data(), f[k]);
        os << buf;
    }
}

void write_field_csv(const ScalarField& f, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write " + path.string());
    write_field_csv(f, out);
}

ScalarField read_field_csv(const std::filesystem::path& path, const GridPtr& grid) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingArtifact, "missing field file " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "x1,x2,mask,value") throw Error(ErrorKind::InvalidConfig, path.string() + ": unexpected header");
    ScalarField f(grid);
    const double tol = 1e-9 * grid->dx();
    for (Index k = 0; k < grid->size(); ++k) {
        if (!std::getline(in, line)) throw Error(ErrorKind::InvalidConfig, path.string() + ": too few rows");
        std::istringstream row(line);
        std::string x1, x2, mask, value;
        std::getline(row, x1, ',');
        std::getline(row, x2, ',');
        std::getline(row, mask, ',');
        std::getline(row, value, ',');
        const Point x = grid->point(k);
        if (std::abs(std::stod(x1) - x[0]) > tol || std::abs(std::stod(x2) - x[1]) > tol ||
            mask != to_string(grid->mask(k)))
            throw Error(ErrorKind::InvalidConfig, path.string() + ": field does not match the grid");
        f[k] = std::stod(value);
    }
    return f;
}

}  // namespace hjb
