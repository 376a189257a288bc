#pragma once

#include "coplay/eval/elo_fit.hpp"
#include "coplay/eval/lp.hpp"
#include "coplay/eval/nash.hpp"
#include "coplay/eval/tournament.hpp"
