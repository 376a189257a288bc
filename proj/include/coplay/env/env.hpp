#pragma once

#include "coplay/env/observation.hpp"
#include "coplay/env/soccer.hpp"
#include "coplay/env/trace.hpp"
#include "coplay/env/types.hpp"
