// Cumulative-regret comparison of LinUCB, LinTS, and a uniform-random player
// on the stationary linear-Gaussian bandit.

#include <cstdio>

#include "adaptrl/envs.hpp"
#include "adaptrl/eval.hpp"

using namespace adaptrl;

int main() {
    BanditEnvSpec env;
    env.mu = (Vector(5) << 0.5, -0.3, 0.4, 0.2, -0.6).finished();

    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 1; s <= 10; ++s) seeds.push_back(s);
    const int T = 5000;

    for (const auto& factory :
         {linucb_factory(env.p, 1.0), lints_factory(env.p, 0.5), uniform_random_factory()}) {
        RegretResult res = regret_curve(factory, env, T, seeds);
        std::printf("%-10s Reg(%d) = %8.1f (SE %.1f)\n", res.curve.agent_label.c_str(), T,
                    res.curve.mean[T - 1], res.curve.std_error[T - 1]);
    }
    return 0;
}
