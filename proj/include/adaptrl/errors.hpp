#pragma once

#include <stdexcept>
#include <string>

namespace adaptrl {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define ADAPTRL_ERROR(name)                                                  \
    struct name : Error {                                                    \
        explicit name(const std::string& msg = #name) : Error(msg) {}        \
    }

ADAPTRL_ERROR(NonFiniteInput);
ADAPTRL_ERROR(DivergentReturn);
ADAPTRL_ERROR(StageOutOfRange);
ADAPTRL_ERROR(EmptyInput);
ADAPTRL_ERROR(DimensionMismatch);
ADAPTRL_ERROR(SingularDesign);
ADAPTRL_ERROR(NonPositiveWeight);
ADAPTRL_ERROR(MissingReward);
ADAPTRL_ERROR(IndexOutOfRange);
ADAPTRL_ERROR(SingularSystem);
ADAPTRL_ERROR(PropensityOutOfRange);
ADAPTRL_ERROR(NoMatchedTrajectories);
ADAPTRL_ERROR(PositivityViolation);
ADAPTRL_ERROR(NegativeReward);
ADAPTRL_ERROR(NotBinaryAction);
ADAPTRL_ERROR(NonBinaryAction);
ADAPTRL_ERROR(EmptyStageSample);
ADAPTRL_ERROR(SingularW);
ADAPTRL_ERROR(NoConvergence);
ADAPTRL_ERROR(NoAvailableArm);
ADAPTRL_ERROR(ClipBoundsInvalid);
ADAPTRL_ERROR(MissingSelectionDistribution);
ADAPTRL_ERROR(RewardOutOfRange);
ADAPTRL_ERROR(ConfigInvalid);

#undef ADAPTRL_ERROR

}  // namespace adaptrl
