#pragma once

#include <cstdint>
#include <iosfwd>

#include "ffep/ingest.hpp"

namespace ffep {

// Writes a Haberman-format table (age, operation year, positive axillary
// nodes, survival status 1|2; no header) drawn from a fixed logistic model.
void write_haberman_like(std::ostream& out, std::size_t n_examples = 306,
                         std::uint64_t seed = 20161111);

// Column schema for Haberman-format files: status 1 -> +1, status 2 -> -1.
ColumnSchema haberman_schema();

}  // namespace ffep
