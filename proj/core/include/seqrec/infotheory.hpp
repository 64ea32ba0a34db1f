#pragma once

#include <vector>

namespace seqrec::info {

// Exact information quantities on small discrete joint distributions, used to
// verify the mutual-information chain-rule rewrite and the variational bound
// behind the training objective. Natural log throughout.
class Joint3 {
  public:
    Joint3(int nt, int ns, int ny);

    int nt() const { return nt_; }
    int ns() const { return ns_; }
    int ny() const { return ny_; }

    double& at(int t, int s, int y);
    double at(int t, int s, int y) const;

    void normalize();
    // Throws std::invalid_argument if mass does not sum to 1 (tol 1e-9) or
    // any entry is negative.
    void require_normalized() const;

    double entropy_t() const;
    double entropy_y() const;
    double mi_ts() const;            // I(t;s)
    double mi_ty() const;            // I(t;y)
    double cmi_ty_given_s() const;   // I(t;y|s)
    double cmi_ts_given_y() const;   // I(t;s|y)
    double h_y_given_s() const;
    double h_y_given_ts() const;

  private:
    int nt_, ns_, ny_;
    std::vector<double> p_;
};

struct IdentityReport {
    double premise = 0.0;       // I(t;s|y); the rewrite assumes this is 0
    bool premise_holds = false; // |premise| < tol
    double rewrite_residual = 0.0;  // I(t;s) - (I(t;y) - I(t;y|s))
    double expansion_residual = 0.0;  // I(t;s) - (I(t;y) - H(y|s) + H(y|t,s) - H(y) + H(y|s)) form check
    double mi_ts = 0.0;
    double entropy_t = 0.0;
};

// Checks the chain-rule rewrite I(t;s) = I(t;y) - I(t;y|s) on an exact
// distribution. When the conditional-independence premise I(t;s|y) = 0 fails,
// premise_holds is false and the residual is reported, not asserted.
IdentityReport check_chain_rule(const Joint3& p, double tol = 1e-12);

struct BoundReport {
    double kl_to_marginal = 0.0;  // E_x KL(p(t|x) || p(t))
    double kl_to_q = 0.0;         // E_x KL(p(t|x) || q(t))
    double gibbs_slack = 0.0;     // -sum p log q + sum p log p  (>= 0)
    bool holds = false;
};

// Verifies the variational upper bound: for any q(t),
// E_x KL(p(t|x)||p(t)) <= E_x KL(p(t|x)||q(t)), with equality at q = p(t).
BoundReport check_variational_bound(const std::vector<std::vector<double>>& p_t_given_x,
                                    const std::vector<double>& p_x,
                                    const std::vector<double>& q_t, double tol = 1e-12);

}  // namespace seqrec::info
