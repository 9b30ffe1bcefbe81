#include "qrm/params.hpp"

#include <cmath>

#include "qrm/errors.hpp"

namespace qrm {

void ModelParams::validate() const {
    if (!std::isfinite(omega) || !std::isfinite(Omega) || !std::isfinite(g) ||
        !std::isfinite(lambda))
        throw validation_error("model parameters must be finite");
    if (omega <= 0.0) throw validation_error("omega must be positive");
    if (Omega <= 0.0) throw validation_error("Omega must be positive");
    if (g < 0.0) throw validation_error("g must be non-negative");
    if (lambda < 0.0)
        throw validation_error(
            "lambda must be non-negative for a direct solve; route negative lambda "
            "through dual_params");
    if (n_cut < 8) throw validation_error("n_cut must be at least 8");
    if (n_levels < 1) throw validation_error("n_levels must be at least 1");
    if (n_levels > n_cut / 2)
        throw validation_error("n_levels must not exceed n_cut/2 (truncation safety)");
}

double critical_coupling(const ModelParams& p) {
    if (!(p.omega > 0.0) || !(p.Omega > 0.0))
        throw validation_error("critical coupling needs positive omega and Omega");
    return std::sqrt(p.omega * p.Omega) / 2.0;
}

ModelParams dual_params(const ModelParams& p) {
    ModelParams q = p;
    if (p.lambda != 0.0) {
        q.lambda = -p.lambda;
        q.momentum_frame = !p.momentum_frame;
    }
    return q;
}

} // namespace qrm
