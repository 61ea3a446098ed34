#include "pyrflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pyrflow/rng.hpp"

namespace pyrflow {

namespace {

double eval_at(const ScalarFn& f, const std::vector<Shape>& shapes,
               const std::vector<std::vector<double>>& values) {
    Tape tape;
    std::vector<Tensor> leaves;
    leaves.reserve(values.size());
    for (size_t i = 0; i < values.size(); ++i) leaves.push_back(tape.leaf(shapes[i], values[i]));
    Tensor y = f(tape, leaves);
    if (y.size() != 1) throw std::invalid_argument("grad_check function must return a scalar");
    return y.item();
}

}  // namespace

double grad_check(const ScalarFn& f, const std::vector<Shape>& shapes,
                  const std::vector<std::vector<double>>& values,
                  const GradCheckOptions& opt) {
    if (shapes.size() != values.size())
        throw std::invalid_argument("grad_check: shapes/values length mismatch");
    if (opt.step <= 0) throw std::invalid_argument("grad_check: step must be > 0");

    // analytic pass
    Tape tape;
    std::vector<Tensor> leaves;
    for (size_t i = 0; i < values.size(); ++i) leaves.push_back(tape.leaf(shapes[i], values[i]));
    Tensor y = f(tape, leaves);
    if (y.size() != 1) throw std::invalid_argument("grad_check function must return a scalar");
    if (!std::isfinite(y.item()))
        throw std::runtime_error("grad_check: non-finite forward value");
    tape.backward(y);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (const Tensor& l : leaves) analytic.push_back(tape.grad(l));

    Rng rng(opt.seed);
    double max_rel = 0.0;
    std::vector<std::vector<double>> work = values;
    for (size_t i = 0; i < values.size(); ++i) {
        const long long n = static_cast<long long>(values[i].size());
        std::vector<long long> coords;
        if (opt.max_coords_per_input <= 0 || n <= opt.max_coords_per_input) {
            coords.resize(n);
            for (long long c = 0; c < n; ++c) coords[c] = c;
        } else {
            for (int c = 0; c < opt.max_coords_per_input; ++c)
                coords.push_back(rng.uniform_int(0, n - 1));
        }
        for (long long c : coords) {
            const double orig = work[i][c];
            work[i][c] = orig + opt.step;
            const double yp = eval_at(f, shapes, work);
            work[i][c] = orig - opt.step;
            const double ym = eval_at(f, shapes, work);
            work[i][c] = orig;
            if (!std::isfinite(yp) || !std::isfinite(ym))
                throw std::runtime_error("grad_check: non-finite value at input " +
                                         std::to_string(i) + " coordinate " +
                                         std::to_string(c));
            const double numeric = (yp - ym) / (2.0 * opt.step);
            const double rel =
                std::abs(analytic[i][c] - numeric) / std::max(1.0, std::abs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

double param_grad_check(const std::function<Tensor(Tape&)>& f, ParamStore& params,
                        const GradCheckOptions& opt) {
    if (opt.step <= 0) throw std::invalid_argument("param_grad_check: step must be > 0");
    Tape tape;
    Tensor y = f(tape);
    if (y.size() != 1)
        throw std::invalid_argument("param_grad_check function must return a scalar");
    if (!std::isfinite(y.item()))
        throw std::runtime_error("param_grad_check: non-finite forward value");
    tape.backward(y);
    auto analytic = tape.parameter_gradients();

    Rng rng(opt.seed);
    double max_rel = 0.0;
    for (Parameter* p : params.all()) {
        const long long n = static_cast<long long>(p->value.size());
        std::vector<long long> coords;
        if (opt.max_coords_per_input <= 0 || n <= opt.max_coords_per_input) {
            coords.resize(n);
            for (long long c = 0; c < n; ++c) coords[c] = c;
        } else {
            for (int c = 0; c < opt.max_coords_per_input; ++c)
                coords.push_back(rng.uniform_int(0, n - 1));
        }
        // parameters outside the forward graph have zero gradient
        static const std::vector<double> kEmpty;
        auto it = analytic.find(p->name);
        const std::vector<double>& ag = it == analytic.end() ? kEmpty : it->second;
        for (long long c : coords) {
            const double analytic_c = ag.empty() ? 0.0 : ag[c];
            const double orig = p->value[c];
            p->value[c] = orig + opt.step;
            Tape tp;
            const double yp = f(tp).item();
            p->value[c] = orig - opt.step;
            Tape tm;
            const double ym = f(tm).item();
            p->value[c] = orig;
            if (!std::isfinite(yp) || !std::isfinite(ym))
                throw std::runtime_error("param_grad_check: non-finite value at " + p->name +
                                         " coordinate " + std::to_string(c));
            const double numeric = (yp - ym) / (2.0 * opt.step);
            const double rel =
                std::abs(analytic_c - numeric) / std::max(1.0, std::abs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace pyrflow
