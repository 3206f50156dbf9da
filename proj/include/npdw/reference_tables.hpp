#pragma once

namespace npdw::reference {

// Published reference values for the binary deletion channel and binary IDS
// channels, bundled so reports can place estimates next to the known bounds.

struct DeletionPoint {
    double d;
    double value;
};

// Information rate upper bound for i.i.d. uniform inputs.
inline constexpr DeletionPoint kDeletionIidUpperBound[] = {
    {0.00, 1.0},      {0.05, 0.747173}, {0.10, 0.589036}, {0.15, 0.468624},
    {0.20, 0.372702}, {0.25, 0.294883}, {0.30, 0.231322}, {0.35, 0.179401},
    {0.40, 0.137187}, {0.45, 0.10316},  {0.50, 0.076071},
};

// Lower bound 1 - h2(d) for i.i.d. uniform inputs.
inline constexpr DeletionPoint kDeletionIidLowerBound[] = {
    {0.01, 0.93212},
    {0.05, 0.7136030428840439},
    {0.10, 0.5310044064107188},
    {0.15, 0.3901596952835995},
    {0.20, 0.2780719051126377},
    {0.25, 0.18872187554086717},
    {0.30, 0.1187091007693073},
    {0.35, 0.06593194462450891},
    {0.40, 0.02904940554533142},
    {0.45, 0.007225546012191719},
    {0.50, 0.0},
};

// Capacity bounds (unconstrained inputs).
inline constexpr DeletionPoint kDeletionCapacityUpperBound[] = {
    {0.0, 1.0}, {0.1, 0.68}, {0.2, 0.49}, {0.3, 0.36}, {0.4, 0.28}, {0.5, 0.215},
};

inline constexpr DeletionPoint kDeletionCapacityLowerBound[] = {
    {0.00, 1.0},    {0.05, 0.7303}, {0.10, 0.5681}, {0.15, 0.4501}, {0.20, 0.3611}, {0.25, 0.2929},
    {0.30, 0.2399}, {0.35, 0.1978}, {0.40, 0.1642}, {0.45, 0.1370}, {0.50, 0.1145},
};

struct IdsBoundsRow {
    double d, i, s;
    double lb, ub;
};

// Capacity bounds for binary IDS channels.
inline constexpr IdsBoundsRow kIdsCapacityBounds[] = {
    {0.01, 0.00, 0.01, 0.842, 0.886}, {0.01, 0.00, 0.03, 0.732, 0.776},
    {0.01, 0.00, 0.10, 0.466, 0.510}, {0.05, 0.00, 0.01, 0.653, 0.767},
    {0.05, 0.00, 0.03, 0.555, 0.669}, {0.05, 0.00, 0.10, 0.321, 0.435},
    {0.10, 0.00, 0.01, 0.492, 0.644}, {0.10, 0.00, 0.03, 0.408, 0.560},
    {0.10, 0.00, 0.10, 0.211, 0.363}, {0.01, 0.01, 0.01, 0.766, 0.863},
    {0.01, 0.03, 0.01, 0.661, 0.808}, {0.01, 0.10, 0.01, 0.412, 0.642},
    {0.03, 0.01, 0.01, 0.662, 0.808}, {0.03, 0.03, 0.01, 0.564, 0.750},
    {0.03, 0.10, 0.01, 0.329, 0.583}, {0.10, 0.01, 0.01, 0.419, 0.649},
    {0.10, 0.03, 0.01, 0.335, 0.589}, {0.10, 0.10, 0.01, 0.139, 0.438},
};

// Lookup helpers; return true and fill out when a matching row exists.
bool deletion_iid_bounds(double d, double& lb, double& ub);
bool ids_capacity_bounds(double ins, double del, double sub, double& lb, double& ub);

}  // namespace npdw::reference
