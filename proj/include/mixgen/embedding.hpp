#pragma once

#include <string>
#include <vector>

#include "mixgen/common.hpp"

namespace mixgen {

// A set of row embeddings, e.g. one row per track or one row per mix.
struct EmbeddingSet {
    std::vector<std::vector<float>> rows;
    std::string source_tag;

    int dim() const { return rows.empty() ? 0 : int(rows[0].size()); }
    int count() const { return int(rows.size()); }
    void validate() const;
};

// "MGEB" file: magic, count u32 (valid rows), dim u32, row-major float32, LE.
void save_embeddings(const std::string& path, const EmbeddingSet& set);
EmbeddingSet load_embeddings(const std::string& path);

}  // namespace mixgen
