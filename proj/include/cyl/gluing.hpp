#pragma once

#include <limits>
#include <string>

#include "cyl/field_operator.hpp"
#include "cyl/floer.hpp"

namespace cyl {

constexpr double kMinNeck = 42.0;

// r = 0 is the "do not glue" branch with R = infinity.
struct GluingProfile {
    double r = 0.0;
    double R = std::numeric_limits<double>::infinity();
    double R_exact = std::numeric_limits<double>::infinity();  // e^{1/r} before snapping
    bool snapped = true;
    int steps = 0;  // R / h_s when snapped
    bool glued() const { return r > 0.0; }
};

GluingProfile make_profile(const CylinderGrid& g, double r, bool snap = true);
// Profile for a prescribed neck length (r = 1 / ln R).
GluingProfile profile_for_neck(const CylinderGrid& g, double R, bool snap = true);
double neck_to_r(double R);

// Smallest s_max that represents the seam of a neck of length R with a
// margin `extra` beyond R + 1.
double required_s_max(double R, double extra);
// Throws GridError naming the required s_max when s_max < R + 1 + extra.
void check_margin(const CylinderGrid& g, const GluingProfile& p, double extra = 1.0);

// Index windows in which the slots are represented on the truncated grid.
Windows glue_windows(const CylinderGrid& g, const GluingProfile& p);

Multiplier preglue_multiplier(const CylinderGrid& g, const GluingProfile& p);
Multiplier antiglue_multiplier(const CylinderGrid& g, const GluingProfile& p);
Multiplier inverse_multiplier(const CylinderGrid& g, const GluingProfile& p);

Field preglue(const GluingProfile& p, const PairField& xi);
Field antiglue(const GluingProfile& p, const PairField& xi);
PairField glue_inverse(const GluingProfile& p, const Field& zeta_plus, const Field& zeta_minus);
PairField splicing_projection(const GluingProfile& p, const PairField& xi);
// max |antiglue(xi)| over the glued grid
double splicing_membership(const GluingProfile& p, const PairField& xi);

struct GluedField {
    Field value, ds;
};
// Value and product-rule s-derivative of the preglued / antiglued field.
GluedField preglue_with_ds(const GluingProfile& p, const PairField& xi);
GluedField antiglue_with_ds(const GluingProfile& p, const PairField& xi);

struct GluingIdentityReport {
    double forward_error = 0.0;   // glue_inverse(plus(xi), minus(xi)) vs xi on windows
    double backward_error = 0.0;  // (plus, minus)(glue_inverse(z)) vs z on |s| <= s_max - R
};
GluingIdentityReport gluing_identities(const GluingProfile& p, const PairField& xi, const PairField& zeta);

// Phi(r, xi) for base pair gamma; zero outside the windows.
PairField filled_section(const HamiltonianModel& M, const PairField& gamma, const GluingProfile& p,
                         const PairField& xi);

// D_E Phi(r, e) composed from the constituent operators.
FieldOperator assemble_DPhi(const HamiltonianModel& M, const PairField& gamma, const GluingProfile& p,
                            const PairField& e, LinVariant v = LinVariant::Full);

// gamma_r^- = tau_{-R} preglue(gamma) in slot-1 coordinates, gamma_r^+ in
// slot-2 coordinates.
PairField glued_constituents(const GluingProfile& p, const PairField& gamma);

// Split at e = 0: DPhi = diag(L_{gamma_r^-}, L_{gamma_r^+}) + [[Q1, -S1], [-S2, Q2]].
struct ErrorDecomposition {
    FieldOperator diag;
    FieldOperator Q;         // diagonal blocks Q1, Q2
    FieldOperator Q_cutoff;  // the cutoff-derivative part of Q
    FieldOperator Q_coef;    // the coefficient-difference part of Q
    FieldOperator S;         // off-diagonal blocks, S(0<-1) = S1, S(1<-0) = S2
    Windows windows;
    double seam1_lo = 0, seam1_hi = 0, seam2_lo = 0, seam2_hi = 0;  // S supports in slot coordinates
};

ErrorDecomposition decompose_errors(const HamiltonianModel& M, const PairField& gamma, const GluingProfile& p);
FieldOperator reassemble(const ErrorDecomposition& d);

struct ReassemblyReport {
    double max_discrepancy = 0.0;
    std::string where;
    double s1_outside = 0.0, s2_outside = 0.0;  // max |coef| of S blocks outside their supports
};
ReassemblyReport reassembly_check(const HamiltonianModel& M, const PairField& gamma, const GluingProfile& p);

}  // namespace cyl
