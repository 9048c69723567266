#pragma once

#include <filesystem>
#include <string>

#include "refinery/catalog.hpp"

namespace refinery::testing {

inline std::filesystem::path source_dir() { return REFINERY_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return source_dir() / "tests" / "fixtures" / name; }

inline const char* kScholarshipQuery =
    "SELECT region, AVG(GPA) AS avg_gpa, COUNT_IF(gender = 'F') AS count_f, COUNT(*) AS count_all "
    "FROM MiddleEarth_Applicants "
    "WHERE GPA > 3.5 AND major IN ('Tactics', 'Archery') "
    "GROUP BY region HAVING COUNT(*) > 100";

// Loaded once per process; the catalog is read-only after load.
inline const Catalog& middle_earth() {
  static const Catalog cat = Catalog::load(DatasetManifest::from_file(fixture("middle_earth.json")));
  return cat;
}

}  // namespace refinery::testing
