#include "seqrec/infotheory.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace seqrec::info {

namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

double entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p) h -= xlogx(v);
    return h;
}

}  // namespace

Joint3::Joint3(int nt, int ns, int ny) : nt_(nt), ns_(ns), ny_(ny) {
    if (nt < 1 || ns < 1 || ny < 1) throw std::invalid_argument("Joint3: empty alphabet");
    p_.assign(static_cast<size_t>(nt) * ns * ny, 0.0);
}

double& Joint3::at(int t, int s, int y) {
    return p_[static_cast<size_t>((t * ns_ + s) * ny_ + y)];
}

double Joint3::at(int t, int s, int y) const {
    return p_[static_cast<size_t>((t * ns_ + s) * ny_ + y)];
}

void Joint3::normalize() {
    double z = 0.0;
    for (double v : p_) z += v;
    if (z <= 0.0) throw std::invalid_argument("Joint3: zero total mass");
    for (double& v : p_) v /= z;
}

void Joint3::require_normalized() const {
    double z = 0.0;
    for (double v : p_) {
        if (v < 0.0) throw std::invalid_argument("Joint3: negative probability");
        z += v;
    }
    if (std::abs(z - 1.0) > 1e-9)
        throw std::invalid_argument("Joint3: probabilities sum to " + std::to_string(z));
}

double Joint3::entropy_t() const {
    std::vector<double> pt(static_cast<size_t>(nt_), 0.0);
    for (int t = 0; t < nt_; ++t)
        for (int s = 0; s < ns_; ++s)
            for (int y = 0; y < ny_; ++y) pt[static_cast<size_t>(t)] += at(t, s, y);
    return entropy(pt);
}

double Joint3::entropy_y() const {
    std::vector<double> py(static_cast<size_t>(ny_), 0.0);
    for (int t = 0; t < nt_; ++t)
        for (int s = 0; s < ns_; ++s)
            for (int y = 0; y < ny_; ++y) py[static_cast<size_t>(y)] += at(t, s, y);
    return entropy(py);
}

double Joint3::mi_ts() const {
    // I(t;s) = sum p(t,s) log p(t,s)/(p(t)p(s))
    std::vector<double> pt(static_cast<size_t>(nt_), 0.0), ps(static_cast<size_t>(ns_), 0.0);
    std::vector<double> pts(static_cast<size_t>(nt_) * ns_, 0.0);
    for (int t = 0; t < nt_; ++t)
        for (int s = 0; s < ns_; ++s)
            for (int y = 0; y < ny_; ++y) {
                double v = at(t, s, y);
                pt[static_cast<size_t>(t)] += v;
                ps[static_cast<size_t>(s)] += v;
                pts[static_cast<size_t>(t * ns_ + s)] += v;
            }
    double mi = 0.0;
    for (int t = 0; t < nt_; ++t)
        for (int s = 0; s < ns_; ++s) {
            double v = pts[static_cast<size_t>(t * ns_ + s)];
            if (v > 0.0)
                mi += v * std::log(v / (pt[static_cast<size_t>(t)] * ps[static_cast<size_t>(s)]));
        }
    return mi;
}

double Joint3::mi_ty() const {
    std::vector<double> pt(static_cast<size_t>(nt_), 0.0), py(static_cast<size_t>(ny_), 0.0);
    std::vector<double> pty(static_cast<size_t>(nt_) * ny_, 0.0);
    for (int t = 0; t < nt_; ++t)
        for (int s = 0; s < ns_; ++s)
            for (int y = 0; y < ny_; ++y) {
                double v = at(t, s, y);
                pt[static_cast<size_t>(t)] += v;
                py[static_cast<size_t>(y)] += v;
                pty[static_cast<size_t>(t * ny_ + y)] += v;
            }
    double mi = 0.0;
    for (int t = 0; t < nt_; ++t)
        for (int y = 0; y < ny_; ++y) {
            double v = pty[static_cast<size_t>(t * ny_ + y)];
            if (v > 0.0)
                mi += v * std::log(v / (pt[static_cast<size_t>(t)] * py[static_cast<size_t>(y)]));
        }
    return mi;
}

double Joint3::cmi_ty_given_s() const {
    // I(t;y|s) = sum_s p(s) sum_{t,y} p(t,y|s) log p(t,y|s)/(p(t|s)p(y|s))
    double mi = 0.0;
    for (int s = 0; s < ns_; ++s) {
        double ps = 0.0;
        std::vector<double> pt(static_cast<size_t>(nt_), 0.0), py(static_cast<size_t>(ny_), 0.0);
        for (int t = 0; t < nt_; ++t)
            for (int y = 0; y < ny_; ++y) {
                double v = at(t, s, y);
                ps += v;
                pt[static_cast<size_t>(t)] += v;
                py[static_cast<size_t>(y)] += v;
            }
        if (ps <= 0.0) continue;
        for (int t = 0; t < nt_; ++t)
            for (int y = 0; y < ny_; ++y) {
                double v = at(t, s, y);
                if (v > 0.0)
                    mi += v * std::log(ps * v /
                                       (pt[static_cast<size_t>(t)] * py[static_cast<size_t>(y)]));
            }
    }
    return mi;
}

double Joint3::cmi_ts_given_y() const {
    double mi = 0.0;
    for (int y = 0; y < ny_; ++y) {
        double py = 0.0;
        std::vector<double> pt(static_cast<size_t>(nt_), 0.0), ps(static_cast<size_t>(ns_), 0.0);
        for (int t = 0; t < nt_; ++t)
            for (int s = 0; s < ns_; ++s) {
                double v = at(t, s, y);
                py += v;
                pt[static_cast<size_t>(t)] += v;
                ps[static_cast<size_t>(s)] += v;
            }
        if (py <= 0.0) continue;
        for (int t = 0; t < nt_; ++t)
            for (int s = 0; s < ns_; ++s) {
                double v = at(t, s, y);
                if (v > 0.0)
                    mi += v * std::log(py * v /
                                       (pt[static_cast<size_t>(t)] * ps[static_cast<size_t>(s)]));
            }
    }
    return mi;
}

double Joint3::h_y_given_s() const {
    double h = 0.0;
    for (int s = 0; s < ns_; ++s) {
        double ps = 0.0;
        std::vector<double> py(static_cast<size_t>(ny_), 0.0);
        for (int t = 0; t < nt_; ++t)
            for (int y = 0; y < ny_; ++y) {
                ps += at(t, s, y);
                py[static_cast<size_t>(y)] += at(t, s, y);
            }
        if (ps <= 0.0) continue;
        for (double v : py)
            if (v > 0.0) h -= v * std::log(v / ps);
    }
    return h;
}

double Joint3::h_y_given_ts() const {
    double h = 0.0;
    for (int t = 0; t < nt_; ++t)
        for (int s = 0; s < ns_; ++s) {
            double pts = 0.0;
            for (int y = 0; y < ny_; ++y) pts += at(t, s, y);
            if (pts <= 0.0) continue;
            for (int y = 0; y < ny_; ++y) {
                double v = at(t, s, y);
                if (v > 0.0) h -= v * std::log(v / pts);
            }
        }
    return h;
}

IdentityReport check_chain_rule(const Joint3& p, double tol) {
    p.require_normalized();
    IdentityReport rep;
    rep.premise = p.cmi_ts_given_y();
    rep.premise_holds = std::abs(rep.premise) < tol;
    rep.mi_ts = p.mi_ts();
    rep.entropy_t = p.entropy_t();
    rep.rewrite_residual = rep.mi_ts - (p.mi_ty() - p.cmi_ty_given_s());
    // Expanded form: I(t;y|s) = H(y|s) - H(y|t,s) when t carries everything
    // about y given s; as an identity it is I(t;y|s) = H(y|s) - H(y|t,s).
    rep.expansion_residual = p.cmi_ty_given_s() - (p.h_y_given_s() - p.h_y_given_ts());
    return rep;
}

BoundReport check_variational_bound(const std::vector<std::vector<double>>& p_t_given_x,
                                    const std::vector<double>& p_x,
                                    const std::vector<double>& q_t, double tol) {
    if (p_t_given_x.size() != p_x.size())
        throw std::invalid_argument("check_variational_bound: |x| mismatch");
    auto require_dist = [](const std::vector<double>& p, const char* what) {
        double z = 0.0;
        for (double v : p) {
            if (v < 0.0)
                throw std::invalid_argument(std::string("check_variational_bound: negative ") + what);
            z += v;
        }
        if (std::abs(z - 1.0) > 1e-9)
            throw std::invalid_argument(std::string("check_variational_bound: ") + what +
                                        " sums to " + std::to_string(z));
    };
    require_dist(p_x, "p(x)");
    require_dist(q_t, "q(t)");
    for (const auto& row : p_t_given_x) require_dist(row, "p(t|x)");
    size_t nt = q_t.size();
    std::vector<double> pt(nt, 0.0);
    for (size_t x = 0; x < p_x.size(); ++x) {
        if (p_t_given_x[x].size() != nt)
            throw std::invalid_argument("check_variational_bound: |t| mismatch");
        for (size_t t = 0; t < nt; ++t) pt[t] += p_x[x] * p_t_given_x[x][t];
    }
    auto kl = [&](const std::vector<double>& p, const std::vector<double>& q) {
        double acc = 0.0;
        for (size_t i = 0; i < p.size(); ++i) {
            if (p[i] > 0.0) {
                if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
                acc += p[i] * std::log(p[i] / q[i]);
            }
        }
        return acc;
    };
    BoundReport rep;
    for (size_t x = 0; x < p_x.size(); ++x) {
        rep.kl_to_marginal += p_x[x] * kl(p_t_given_x[x], pt);
        rep.kl_to_q += p_x[x] * kl(p_t_given_x[x], q_t);
    }
    rep.gibbs_slack = kl(pt, q_t);
    rep.holds = rep.kl_to_marginal <= rep.kl_to_q + tol;
    return rep;
}

}  // namespace seqrec::info
