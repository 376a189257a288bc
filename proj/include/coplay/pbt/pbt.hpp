#pragma once

#include "coplay/pbt/config.hpp"
#include "coplay/pbt/elo.hpp"
#include "coplay/pbt/match.hpp"
#include "coplay/pbt/population.hpp"
#include "coplay/pbt/trainer.hpp"
