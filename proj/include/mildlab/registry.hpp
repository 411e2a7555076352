#pragma once

#include <string>
#include <vector>

namespace mildlab {

struct TheoremEntry {
    std::string id;
    std::string category;  // yosida, resolvent, poisson, semilinear, deterministic, corollary, lemma
    std::string description;
    std::string statement;  // the limit asserted
};

// The closed registry, in a fixed order.
const std::vector<TheoremEntry>& theorem_registry();
bool is_registered(const std::string& id);
const TheoremEntry& registry_entry(const std::string& id);
// Case-insensitive substring match on id or category; empty filter lists all.
std::vector<TheoremEntry> list_theorems(const std::string& filter = "");

}  // namespace mildlab
