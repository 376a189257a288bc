#pragma once

#include "coplay/netcore/adam.hpp"
#include "coplay/netcore/checkpoint.hpp"
#include "coplay/netcore/gaussian.hpp"
#include "coplay/netcore/layers.hpp"
#include "coplay/netcore/tensor.hpp"
