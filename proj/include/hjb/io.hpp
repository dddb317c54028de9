#pragma once

#include "hjb/grid.hpp"

#include <filesystem>
#include <iosfwd>

namespace hjb {

/// Header `x1,x2,mask,value`, one row per grid point in flat-index order,
/// numbers printed with %.17g so a read-back is exact.
void write_field_csv(const ScalarField& f, std::ostream& os);
void write_field_csv(const ScalarField& f, const std::filesystem::path& path);

/// Reads a field written by write_field_csv onto `grid`. Throws
/// MissingArtifact if the file is absent and InvalidConfig if its points or
/// mask do not match the grid.
ScalarField read_field_csv(const std::filesystem::path& path, const GridPtr& grid);

}  // namespace hjb
