// SPDX-License-Identifier: Apache-2.0

#include "dropgan/objectives.hpp"

namespace dropgan {

std::string_view objective_name(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::GanMinimax: return "gan-minimax";
        case ObjectiveKind::GanNonSaturating: return "gan-nonsaturating";
        case ObjectiveKind::LsGan: return "lsgan";
    }
    return "gan-minimax";
}

ObjectiveKind parse_objective(std::string_view name) {
    for (auto k : {ObjectiveKind::GanMinimax, ObjectiveKind::GanNonSaturating, ObjectiveKind::LsGan}) {
        if (objective_name(k) == name) return k;
    }
    throw ConfigError("unknown objective '" + std::string(name) + "'");
}

Head required_head(ObjectiveKind k) {
    return k == ObjectiveKind::LsGan ? Head::Raw : Head::Probability;
}

namespace {

void check_head(ObjectiveKind kind, Scores s, const char* what) {
    if (s.head != required_head(kind)) {
        throw Error(std::string(what) + ": " + std::string(objective_name(kind)) + " needs a " +
                    (required_head(kind) == Head::Raw ? "raw" : "probability") + " head");
    }
}

}  // namespace

NodeId d_loss(Graph& g, ObjectiveKind kind, Scores real, Scores fake) {
    check_head(kind, real, "d_loss");
    check_head(kind, fake, "d_loss");
    if (kind == ObjectiveKind::LsGan) {
        const NodeId r = g.mean(g.square(g.add_constant(real.node, -1.0)));
        const NodeId f = g.mean(g.square(fake.node));
        return g.scale(g.add(r, f), 0.5);
    }
    const NodeId log_real = g.mean(g.log(real.node));
    const NodeId log_not_fake = g.mean(g.log(g.add_constant(g.negate(fake.node), 1.0)));
    return g.negate(g.add(log_real, log_not_fake));
}

NodeId g_loss(Graph& g, ObjectiveKind kind, Scores fake) {
    check_head(kind, fake, "g_loss");
    switch (kind) {
        case ObjectiveKind::GanMinimax:
            return g.mean(g.log(g.add_constant(g.negate(fake.node), 1.0)));
        case ObjectiveKind::GanNonSaturating:
            return g.negate(g.mean(g.log(fake.node)));
        case ObjectiveKind::LsGan:
            return g.scale(g.mean(g.square(g.add_constant(fake.node, -1.0))), 0.5);
    }
    throw Error("g_loss: unknown objective");
}

std::vector<std::size_t> DropoutMask::contributors() const {
    if (fallback_index) return {*fallback_index};
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < bits.size(); ++k) {
        if (bits[k] != 0) out.push_back(k);
    }
    return out;
}

DropoutMask DropoutMask::all_kept(std::size_t k) {
    return DropoutMask{std::vector<std::uint8_t>(k, 1), std::nullopt};
}

std::string_view aggregation_name(AggregationMode::Kind k) {
    switch (k) {
        case AggregationMode::Kind::Dropout: return "dropout";
        case AggregationMode::Kind::GmanMean: return "gman-0";
        case AggregationMode::Kind::GmanMax: return "gman-1";
        case AggregationMode::Kind::Single: return "single";
    }
    return "dropout";
}

AggregationMode::Kind parse_aggregation(std::string_view name) {
    using K = AggregationMode::Kind;
    for (auto k : {K::Dropout, K::GmanMean, K::GmanMax, K::Single}) {
        if (aggregation_name(k) == name) return k;
    }
    throw ConfigError("unknown aggregation '" + std::string(name) + "'");
}

namespace {

NodeId sum_nodes(Graph& g, std::span<const NodeId> nodes) {
    NodeId acc = nodes.front();
    for (std::size_t i = 1; i < nodes.size(); ++i) acc = g.add(acc, nodes[i]);
    return acc;
}

}  // namespace

NodeId aggregate_g_loss(Graph& g, const AggregationMode& mode,
                        std::span<const NodeId> per_d_losses, const DropoutMask& mask) {
    const std::size_t k = per_d_losses.size();
    if (k == 0) throw Error("aggregate_g_loss: no discriminator losses");
    using Kind = AggregationMode::Kind;

    switch (mode.kind) {
        case Kind::Single:
            if (k != 1) {
                throw Error("aggregate_g_loss: single mode needs exactly one discriminator, got " +
                            std::to_string(k));
            }
            return per_d_losses[0];
        case Kind::GmanMean:
            return g.scale(sum_nodes(g, per_d_losses), 1.0 / static_cast<double>(k));
        case Kind::GmanMax: {
            std::size_t best = 0;
            for (std::size_t i = 1; i < k; ++i) {
                if (g.value(per_d_losses[i])(0, 0) > g.value(per_d_losses[best])(0, 0)) best = i;
            }
            return per_d_losses[best];
        }
        case Kind::Dropout: {
            if (mask.size() != k) {
                throw Error("aggregate_g_loss: mask has " + std::to_string(mask.size()) +
                            " bits for " + std::to_string(k) + " losses");
            }
            const auto who = mask.contributors();
            if (who.empty()) {
                throw Error("aggregate_g_loss: all-zero mask without a resolved fallback");
            }
            std::vector<NodeId> picked;
            picked.reserve(who.size());
            for (std::size_t i : who) {
                if (i >= k || !per_d_losses[i].valid()) {
                    throw Error("aggregate_g_loss: missing loss for contributing discriminator " +
                                std::to_string(i));
                }
                picked.push_back(per_d_losses[i]);
            }
            const NodeId total = sum_nodes(g, picked);
            if (mode.normalize_by_survivors && picked.size() > 1) {
                return g.scale(total, 1.0 / static_cast<double>(picked.size()));
            }
            return total;
        }
    }
    throw Error("aggregate_g_loss: unknown mode");
}

}  // namespace dropgan
