#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ucf/tensor.hpp"

namespace ucf {

struct NamedParam {
    std::string name;
    Tensor value;
};

// AdamW with decoupled weight decay. Parameters are organized in groups so
// different parts of a model can run at different learning rates; moments are
// kept per parameter and bias-corrected by the shared step count.
class AdamW {
public:
    explicit AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                   double weight_decay = 1e-4)
        : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
        if (!(beta1 >= 0.0 && beta1 < 1.0))
            throw ContractError("AdamW: beta1 must be in [0, 1), got " + std::to_string(beta1));
        if (!(beta2 >= 0.0 && beta2 < 1.0))
            throw ContractError("AdamW: beta2 must be in [0, 1), got " + std::to_string(beta2));
        if (!(eps > 0.0)) throw ContractError("AdamW: eps must be positive");
        if (!(weight_decay >= 0.0)) throw ContractError("AdamW: weight_decay must be >= 0");
    }

    void add_group(std::vector<NamedParam> params, double lr) {
        if (!(lr > 0.0)) throw ContractError("AdamW: learning rate must be positive");
        Group g;
        g.lr = lr;
        for (NamedParam& p : params) {
            State s;
            s.param = std::move(p);
            s.m.assign(s.param.value.numel(), 0.0);
            s.v.assign(s.param.value.numel(), 0.0);
            g.states.push_back(std::move(s));
        }
        groups_.push_back(std::move(g));
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (Group& g : groups_) {
            const double decay = 1.0 - g.lr * weight_decay_;
            for (State& s : g.states) {
                if (!s.param.value.has_grad())
                    throw ContractError("AdamW: parameter '" + s.param.name +
                                        "' has no gradient at step()");
                std::vector<double>& w = s.param.value.raw();
                const std::vector<double>& grad = s.param.value.grad();
                for (std::size_t i = 0; i < w.size(); ++i) {
                    w[i] *= decay;  // decoupled decay, applied before the moment step
                    s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * grad[i];
                    s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * grad[i] * grad[i];
                    w[i] -= g.lr * (s.m[i] / bc1) / (std::sqrt(s.v[i] / bc2) + eps_);
                }
            }
        }
    }

    void zero_grad() {
        for (Group& g : groups_)
            for (State& s : g.states) s.param.value.zero_grad();
    }

    std::size_t step_count() const { return t_; }
    double beta1() const { return beta1_; }
    double beta2() const { return beta2_; }
    double eps() const { return eps_; }
    double weight_decay() const { return weight_decay_; }

private:
    struct State {
        NamedParam param;
        std::vector<double> m, v;
    };
    struct Group {
        double lr = 0.0;
        std::vector<State> states;
    };

    double beta1_, beta2_, eps_, weight_decay_;
    std::size_t t_ = 0;
    std::vector<Group> groups_;
};

}  // namespace ucf
