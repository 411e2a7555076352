#include "mildlab/registry.hpp"

#include <algorithm>
#include <cctype>

#include "mildlab/error.hpp"

namespace mildlab {

const std::vector<TheoremEntry>& theorem_registry() {
    static const std::vector<TheoremEntry> entries = {
        {"yo2sc", "yosida", "Yosida regularization of A, linear equation, martingale noise, H_2",
         "E sup |y_lambda - y|^2 -> 0 as lambda -> 0"},
        {"yopsc", "yosida", "Yosida regularization of A, linear equation, additive martingale noise, H_p",
         "E sup |y_lambda - y|^p -> 0 as lambda -> 0"},
        {"nyo2sc", "resolvent", "Strong-resolvent perturbation A_n -> A, linear equation, martingale noise, H_2",
         "E sup |y_n - y|^2 -> 0 as n -> infinity"},
        {"nyotta", "resolvent", "Strong-resolvent perturbation A_n -> A, linear equation, additive noise, H_p",
         "E sup |y_n - y|^p -> 0 as n -> infinity"},
        {"trippona_lambda", "poisson", "Regularized operator A_lambda, linear equation, Poisson random measure, H_p",
         "y_lambda -> y in H_p as lambda -> 0"},
        {"trippona", "poisson", "Strong-resolvent perturbation A_n -> A, linear equation, Poisson random measure, H_p",
         "y_n -> y in H_p as n -> infinity"},
        {"nyo2", "semilinear", "Joint perturbation of (A, f, B, u_0), semilinear equation, martingale noise, H_2",
         "u_n -> u in H_2"},
        {"nyop", "semilinear", "Joint perturbation of (A, f, G, u_0), semilinear equation, Poisson random measure, H_p",
         "u_n -> u in H_p"},
        {"additive_p", "semilinear", "Joint perturbation with additive noise, H_p for p > 2",
         "u_n -> u in H_p"},
        {"titikaka", "deterministic", "Trotter-Kato for inhomogeneous deterministic equations",
         "sup_t |u_n(t) - u(t)| -> 0"},
        {"cor_utile", "corollary", "Explicit bound on |y - y_lambda|_{H_2} via resolvent-smoothed data",
         "|y - y_lambda|^2 <= C (eps-terms + T lambda (E|A y_0^eps|^2 + int |A B^eps|^2))"},
        {"lemma_uno", "lemma", "Initial-datum propagation S_n u_0n -> S u_0", "S_n xi_n -> S xi in H_p(t)"},
        {"lemma_due", "lemma", "Drift convolution estimate", "|.|^p <= delta + gamma int |v - w|^p"},
        {"lemma_tre", "lemma", "Martingale convolution estimate, p = 2", "|.|^2 <= delta + gamma int |u_n - u|^2"},
        {"lemma_treppe", "lemma", "Poisson convolution estimate, p >= 2", "|.|^p <= delta + gamma int |u_n - u|^p"},
    };
    return entries;
}

bool is_registered(const std::string& id) {
    const auto& r = theorem_registry();
    return std::any_of(r.begin(), r.end(), [&](const TheoremEntry& e) { return e.id == id; });
}

const TheoremEntry& registry_entry(const std::string& id) {
    for (const auto& e : theorem_registry())
        if (e.id == id) return e;
    throw ConfigInvalid("unknown theorem id '" + id + "'");
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

std::vector<TheoremEntry> list_theorems(const std::string& filter) {
    const std::string f = lower(filter);
    std::vector<TheoremEntry> out;
    for (const auto& e : theorem_registry())
        if (f.empty() || lower(e.id).find(f) != std::string::npos || e.category.find(f) != std::string::npos)
            out.push_back(e);
    return out;
}

}  // namespace mildlab
