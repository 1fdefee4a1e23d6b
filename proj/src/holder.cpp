#include "transgap/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace transgap {

namespace {

using Table = std::vector<std::vector<double>>;

Table zeros(std::size_t k) { return Table(k, std::vector<double>(k, 0.0)); }

void gcn_tables(double cX, double cW, double g, double P, double sC, double a, Table& lin, Table& hol) {
    const double r2 = std::numbers::sqrt2;
    const double g2 = g * g, g4 = g2 * g2;
    lin[1][0] = r2 * cX * g2 + 2.0 * cX * cW * cW * g4;
    lin[1][1] = 2.0 * cX * cW * g2;
    lin[0][0] = cX * cX * cW * g4;
    lin[0][1] = r2 * cX * g2 + 2.0 * cX * cX * cW * g4;
    hol[0][0] = std::pow(cX, 1.0 + a) * cW * P * sC * std::pow(g, 2.0 + a);
}

void sgc_tables(double cX, double cW, double g, Table& lin) {
    const double r2 = std::numbers::sqrt2;
    const double sq = cX * cX * cW * cW * g * g;
    lin[1][0] = r2 * cX * g + sq;
    lin[1][1] = sq;
    lin[0][0] = sq;
    lin[0][1] = r2 * cX * g + sq;
}

void appnp_tables(double cX, double cW, double g, double P, double sC, double a, Table& lin, Table& hol) {
    const double r2 = std::numbers::sqrt2;
    const double sq = cX * cX * cW * cW * g * g;
    const double xa = std::pow(cX, 1.0 + a), wa = std::pow(cW, 1.0 + a);
    lin[1][0] = r2 * cX * g + sq;
    lin[1][1] = sq;
    hol[1][0] = g * sC * xa * wa;
    hol[1][1] = r2 * P * g * xa * wa;
    lin[0][0] = sq;
    lin[0][1] = cX * r2 * g + sq;
    hol[0][0] = xa * wa * P * r2 * g;
    hol[0][1] = (xa * cW + xa * wa) * P * r2 * g;
}

void gpr_tables(double cX, double cW, double G, double Sig, double P, double sC, double a, Table& lin, Table& hol) {
    const double r2 = std::numbers::sqrt2;
    const double sq = cX * cX * cW * cW * G * G;
    const double xa = std::pow(cX, 1.0 + a), wa = std::pow(cW, 1.0 + a);
    lin[1][0] = sq;
    lin[1][1] = r2 * cX * G + sq;
    lin[1][2] = (r2 + cX * cW * G) * cX * cW * cW * Sig;
    hol[1][0] = G * sC * xa * wa;
    hol[1][1] = r2 * P * G * xa * wa;
    lin[0][0] = sq;
    lin[0][1] = cX * r2 * G + sq;
    lin[0][2] = (r2 + cX * cW * G) * cX * cW * cW * Sig;
    hol[0][0] = r2 * P * (xa * cW + xa * wa);
    hol[0][1] = xa * wa * P * r2 * G;
    lin[2][0] = cX * cX * cW * cW * cW * G * Sig;
    lin[2][1] = lin[2][0];
    lin[2][2] = cX * cX * std::pow(cW, 4.0) * Sig * Sig;
    hol[2][0] = r2 * P * std::pow(cX, a) * std::pow(cW, a) * Sig;
    hol[2][1] = hol[2][0];
}

void gcnii_tables(const ModelSpec& s, double cX, double cW, double g, double P, const GcniiIntermediates& k, double a,
                  Table& lin, Table& hol) {
    const double r2 = std::numbers::sqrt2;
    const double a1 = s.alpha[0], a2 = s.alpha[1];
    const double b1 = s.beta[0], b2 = s.beta[1];
    const double B1 = k.B1, B2 = k.B2, C1 = k.C1, C2 = k.C2;
    const double om = 1.0 - a2;
    const double head = r2 + 2.0 * cW * B2;
    const double r22 = b2 * B2 / C2;
    auto pw = [a](double x) { return std::pow(x, a); };

    lin[3][3] = 2.0 * B2 * B2;
    lin[3][2] = head * r22;
    lin[3][1] = om * b1 * head * B1 * C2 / C1 * g;
    lin[3][0] = head * B2 / cW;

    lin[2][3] = head * r22;
    lin[2][2] = cW * cW * r22 * r22;
    lin[2][1] = om * cW * B1 * b1 * b2 / C1 * g * (cW * B2 + r2);
    lin[2][0] = b2 * B2 * (r2 + B2 * cW) / C2;
    hol[2][2] = r2 * P * cW * std::pow(r22, 1.0 + a);
    hol[2][1] = r2 * P * cW * pw(om) * pw(b1) * pw(B1 * C2 / C1) * pw(g) * r22;
    hol[2][0] = r2 * P * cW * pw(B2 / cW) * r22;

    lin[1][3] = b1 * B1 * C2 / C1 * g * head;
    lin[1][2] = om * b1 * B1 / C1 * g * (cW * cW * b2 * B2 + r2 * (1.0 - b2) * cW);
    lin[1][1] = om * om * b1 * b1 * cW * cW * B1 * B1 * C2 * C2 / (C1 * C1) * g;
    lin[1][0] = om * cW * b1 * B1 * B2 / C1 * g;
    hol[1][2] = r2 * om * cW * P * b1 * B1 * C2 / C1 * g * pw(r22);
    hol[1][1] = r2 * cW * C2 * P * (std::pow(om, 1.0 + a) * pw(C2) * pw(g) + om) * std::pow(b1 * B1 / C1, 1.0 + a) * g;
    hol[1][0] = r2 * om * cW * P * (pw(B2 / cW) + pw(B1 / cW)) * b1 * B1 * C2 / C1 * g;

    lin[0][3] = cX * B2 * head;
    lin[0][2] = r2 * a2 * b2 * cX * cX * cW * cW + r2 * om * (1.0 - b2) * cX * cW * B1 * g;
    lin[0][1] = (2.0 * om * b1 * cX * cW * cW * B1 * B2 * C2 / C1 + r2 * a1 * om * b1 * cX * cX * cW * cW * C2) * g;
    lin[0][0] = cX * B2 * head;
    hol[0][2] = B2 * cX * cW * r2 * P * pw(r22);
    hol[0][1] = (B2 * pw(om) * pw(C2) * pw(g) + B1 * C2 * g) * r2 * P * cX * cW * pw(b1 * B1 / C1);
    hol[0][0] = r2 * cX * cW * P * (B2 * pw(B2 / cW) + om * C2 * g * B1 * pw(B1 / cW));
}

}  // namespace

double aggregate_holder(const std::vector<double>& P_col, const std::vector<double>& Pt_col, double a) {
    if (!(a > 0.0 && a <= 1.0)) usage_error("holder exponent must lie in (0, 1]");
    double lin = 0.0, hol = 0.0;
    for (double p : P_col) lin += p * p;
    const double e = 2.0 / (2.0 - a);
    for (double p : Pt_col) hol += std::pow(p, e);
    return std::sqrt(lin) + std::pow(hol, 1.0 - a / 2.0);
}

HolderResult holder_constant(const ModelSpec& spec, double c_X, double c_W, const GraphNorms& nm, double alpha_tilde) {
    if (!(alpha_tilde > 0.0 && alpha_tilde <= 1.0)) usage_error("holder exponent must lie in (0, 1]");
    const Layout layout = make_layout(spec);
    const std::size_t nb = layout.blocks.size();
    HolderResult r;
    r.alpha_tilde = alpha_tilde;
    int width = spec.h;
    if (spec.arch == Arch::APPNP || spec.arch == Arch::GPRGNN) width = std::max(spec.h, spec.C);
    r.activation_P = spec.activation.holder_constant(width);
    const double P = r.activation_P;
    const double sC = std::sqrt(static_cast<double>(spec.C));
    Table lin = zeros(nb), hol = zeros(nb);
    switch (spec.arch) {
        case Arch::GCN:
            if (spec.layers != 2) usage_error("no Hoelder tables for GCN with " + std::to_string(spec.layers) + " layers");
            gcn_tables(c_X, c_W, nm.a_inf, P, sC, alpha_tilde, lin, hol);
            break;
        case Arch::SGC: sgc_tables(c_X, c_W, nm.a2_inf, lin); break;
        case Arch::APPNP: appnp_tables(c_X, c_W, nm.g_inf, P, sC, alpha_tilde, lin, hol); break;
        case Arch::GPRGNN: gpr_tables(c_X, c_W, nm.g_inf, nm.power_sum, P, sC, alpha_tilde, lin, hol); break;
        case Arch::GCNII: {
            if (spec.layers != 2) usage_error("no Hoelder tables for GCNII with " + std::to_string(spec.layers) + " layers");
            if (!(c_W > 0.0)) usage_error("GCNII tables need c_W > 0");
            const LipschitzResult lr = lipschitz_constant(spec, c_X, c_W, nm);
            gcnii_tables(spec, c_X, c_W, nm.a_inf, P, *lr.gcnii, alpha_tilde, lin, hol);
            break;
        }
    }
    r.P_col.assign(nb, 0.0);
    r.Pt_col.assign(nb, 0.0);
    for (std::size_t h = 0; h < nb; ++h)
        for (std::size_t i = 0; i < nb; ++i) {
            r.P_col[i] += lin[h][i];
            r.Pt_col[i] += hol[h][i];
        }
    r.linear = std::move(lin);
    r.holder = std::move(hol);
    r.P_F = aggregate_holder(r.P_col, r.Pt_col, alpha_tilde);
    return r;
}

}  // namespace transgap
