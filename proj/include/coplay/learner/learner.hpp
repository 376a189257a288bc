#pragma once

#include "coplay/learner/agent.hpp"
#include "coplay/learner/batch.hpp"
#include "coplay/learner/hyperparams.hpp"
#include "coplay/learner/replay.hpp"
#include "coplay/learner/retrace.hpp"
#include "coplay/learner/updates.hpp"
