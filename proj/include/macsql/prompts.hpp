#pragma once

#include <string>
#include <string_view>

namespace macsql::prompts {

// Placeholders: {db_id} {desc_str} {fk_str} {query} {evidence}
extern const std::string_view kSelector;

// The decomposer prompt is assembled from a header, up to two worked examples and the new item,
// joined by blank lines. Placeholders: {desc_str} {fk_str} {query} {evidence}
extern const std::string_view kDecomposerHeader;
extern const std::string_view kDecomposerShotSchools;
extern const std::string_view kDecomposerShotBanking;
extern const std::string_view kDecomposerNewItem;

// Placeholders: {query} {evidence} {desc_str} {fk_str} {sql} {sqlite_error} {exception_class}
extern const std::string_view kRefiner;

/// Decomposer template with the first `shots` worked examples (0, 1 or 2).
std::string decomposer_template(int shots);

}  // namespace macsql::prompts
