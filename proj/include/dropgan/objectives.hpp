// SPDX-License-Identifier: Apache-2.0
//
// Adversarial losses and the generator-side aggregation over an ensemble
// of discriminators.

#pragma once

#include "dropgan/graph.hpp"
#include "dropgan/nets.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace dropgan {

enum class ObjectiveKind { GanMinimax, GanNonSaturating, LsGan };

std::string_view objective_name(ObjectiveKind k);
ObjectiveKind parse_objective(std::string_view name);
/// Sigmoid head for the GAN losses, raw head for least squares.
Head required_head(ObjectiveKind k);

/// A discriminator output node together with the head that produced it.
struct Scores {
    NodeId node;
    Head head;
};

/// Loss each discriminator minimizes, averaged over the minibatch.
///   gan-*: -(mean log s_real + mean log(1 - s_fake))
///   lsgan: 0.5 mean (s_real - 1)^2 + 0.5 mean s_fake^2
NodeId d_loss(Graph& g, ObjectiveKind kind, Scores real, Scores fake);

/// Loss the generator descends against one discriminator.
///   gan-minimax:       mean log(1 - s_fake)
///   gan-nonsaturating: -mean log s_fake
///   lsgan:             0.5 mean (s_fake - 1)^2
NodeId g_loss(Graph& g, ObjectiveKind kind, Scores fake);

/// Keep bits for one batch plus the discriminator picked when every bit
/// came up zero.
struct DropoutMask {
    std::vector<std::uint8_t> bits;
    std::optional<std::size_t> fallback_index;  // 0-based

    std::size_t size() const { return bits.size(); }
    bool fallback_fired() const { return fallback_index.has_value(); }
    /// Indices whose loss reaches the generator: the kept bits, or the
    /// fallback discriminator alone.
    std::vector<std::size_t> contributors() const;
    static DropoutMask all_kept(std::size_t k);

    friend bool operator==(const DropoutMask&, const DropoutMask&) = default;
};

struct AggregationMode {
    enum class Kind { Dropout, GmanMean, GmanMax, Single };
    Kind kind = Kind::Dropout;
    /// Divide the dropout sum by the number of contributors. Off by
    /// default: the plain sum is the method as published.
    bool normalize_by_survivors = false;
};

std::string_view aggregation_name(AggregationMode::Kind k);
AggregationMode::Kind parse_aggregation(std::string_view name);

/// Combines per-discriminator generator losses into the loss G descends.
/// `per_d_losses` has one entry per discriminator; entries the mask drops
/// are never read and may be empty handles. GmanMax needs its inputs
/// evaluated already (it selects by value; ties go to the lowest index).
NodeId aggregate_g_loss(Graph& g, const AggregationMode& mode,
                        std::span<const NodeId> per_d_losses, const DropoutMask& mask);

}  // namespace dropgan
