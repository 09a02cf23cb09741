#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace pearl::metrics {

enum class EditOp { match, substitution, deletion, insertion };

std::string_view to_string(EditOp op);

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

struct AlignStep {
    EditOp op = EditOp::match;
    std::size_t ref = kNoIndex;  // kNoIndex for insertions
    std::size_t hyp = kNoIndex;  // kNoIndex for deletions
    bool operator==(const AlignStep&) const = default;
};

struct Alignment {
    std::vector<AlignStep> steps;

    std::size_t count(EditOp op) const {
        std::size_t n = 0;
        for (const auto& s : steps) n += s.op == op;
        return n;
    }
    std::size_t cost() const { return steps.size() - count(EditOp::match); }
};

// Minimal unit-cost alignment (Levenshtein). Among minimal alignments the one
// with the most substitutions wins. Cost and S then fix D and I, so swapping
// the inputs swaps D and I and leaves S unchanged.
template <typename T>
Alignment align(std::span<const T> ref, std::span<const T> hyp) {
    struct Cell {
        std::uint32_t cost = 0;
        std::uint32_t subs = 0;
    };
    auto better = [](Cell a, Cell b) { return a.cost < b.cost || (a.cost == b.cost && a.subs > b.subs); };
    const std::size_t n = ref.size();
    const std::size_t m = hyp.size();
    const std::size_t width = m + 1;
    std::vector<Cell> d((n + 1) * width);
    for (std::size_t j = 0; j <= m; ++j) d[j] = {static_cast<std::uint32_t>(j), 0};
    for (std::size_t i = 1; i <= n; ++i) {
        Cell* row = &d[i * width];
        const Cell* prev = &d[(i - 1) * width];
        row[0] = {static_cast<std::uint32_t>(i), 0};
        for (std::size_t j = 1; j <= m; ++j) {
            const bool eq = ref[i - 1] == hyp[j - 1];
            Cell best{prev[j - 1].cost + (eq ? 0u : 1u), prev[j - 1].subs + (eq ? 0u : 1u)};
            const Cell del{prev[j].cost + 1, prev[j].subs};
            const Cell ins{row[j - 1].cost + 1, row[j - 1].subs};
            if (better(del, best)) best = del;
            if (better(ins, best)) best = ins;
            row[j] = best;
        }
    }

    Alignment out;
    out.steps.reserve(n + m);
    std::size_t i = n;
    std::size_t j = m;
    auto same = [](Cell a, Cell b) { return a.cost == b.cost && a.subs == b.subs; };
    while (i > 0 || j > 0) {
        const Cell here = d[i * width + j];
        if (i > 0 && j > 0) {
            const Cell diag = d[(i - 1) * width + (j - 1)];
            if (ref[i - 1] == hyp[j - 1] && same(diag, here)) {
                out.steps.push_back({EditOp::match, i - 1, j - 1});
                --i, --j;
                continue;
            }
            if (ref[i - 1] != hyp[j - 1] && same({diag.cost + 1, diag.subs + 1}, here)) {
                out.steps.push_back({EditOp::substitution, i - 1, j - 1});
                --i, --j;
                continue;
            }
        }
        if (i > 0) {
            const Cell up = d[(i - 1) * width + j];
            if (same({up.cost + 1, up.subs}, here)) {
                out.steps.push_back({EditOp::deletion, i - 1, kNoIndex});
                --i;
                continue;
            }
        }
        out.steps.push_back({EditOp::insertion, kNoIndex, j - 1});
        --j;
    }
    std::reverse(out.steps.begin(), out.steps.end());
    return out;
}

template <typename Range>
Alignment align_sequences(const Range& ref, const Range& hyp) {
    using T = typename Range::value_type;
    return align<T>(std::span<const T>(ref.data(), ref.size()), std::span<const T>(hyp.data(), hyp.size()));
}

}  // namespace pearl::metrics
