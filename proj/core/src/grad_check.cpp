#include "sern/grad_check.hpp"

#include <cmath>
#include <cstring>

namespace sern {

namespace {

double eval_loss(const std::function<Var(Graph&)>& forward) {
    Graph g;
    Var loss = forward(g);
    if (g.value(loss).size() != 1) {
        throw ContractError("grad_check: forward must produce a scalar loss");
    }
    return g.value(loss).values[0];
}

}  // namespace

double grad_check(const std::function<Var(Graph&)>& forward, std::span<Tensor* const> params,
                  double epsilon) {
    if (!(epsilon > 0.0)) throw ContractError("grad_check: epsilon must be positive");

    const double probe1 = eval_loss(forward);
    const double probe2 = eval_loss(forward);
    if (std::memcmp(&probe1, &probe2, sizeof(double)) != 0) {
        throw ContractError("grad_check: forward pass is not deterministic");
    }

    // A parameter the forward never stages must read as zero analytic grad,
    // not as whatever a previous backward left behind.
    for (Tensor* p : params) p->zero_grad();

    Graph g;
    Var loss = forward(g);
    g.backward(loss);

    double worst = 0.0;
    for (Tensor* p : params) {
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double saved = p->values[i];
            p->values[i] = saved + epsilon;
            const double up = eval_loss(forward);
            p->values[i] = saved - epsilon;
            const double down = eval_loss(forward);
            p->values[i] = saved;

            const double numeric = (up - down) / (2.0 * epsilon);
            const double analytic = p->grad.empty() ? 0.0 : p->grad[i];
            const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace sern
