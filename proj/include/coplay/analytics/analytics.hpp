#pragma once

#include "coplay/analytics/behavior.hpp"
#include "coplay/analytics/counterfactual.hpp"
#include "coplay/analytics/probe.hpp"
