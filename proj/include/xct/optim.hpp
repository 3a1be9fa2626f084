#ifndef XCT_OPTIM_HPP
#define XCT_OPTIM_HPP

#include <cmath>
#include <cstddef>
#include <vector>

namespace xct {

// Adam over a flat parameter vector (Kingma & Ba), with bias correction.
template <class T>
class Adam {
public:
    Adam(std::size_t n, T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, T(0)), v_(n, T(0)) {}

    void set_lr(T lr) { lr_ = lr; }
    T lr() const { return lr_; }

    void step(std::vector<T>& params, const std::vector<T>& grads) {
        ++t_;
        T bc1 = T(1) - std::pow(beta1_, T(t_));
        T bc2 = T(1) - std::pow(beta2_, T(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (T(1) - beta1_) * grads[i];
            v_[i] = beta2_ * v_[i] + (T(1) - beta2_) * grads[i] * grads[i];
            T mhat = m_[i] / bc1;
            T vhat = v_[i] / bc2;
            params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }

private:
    T lr_, beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<T> m_, v_;
};

} // namespace xct

#endif
