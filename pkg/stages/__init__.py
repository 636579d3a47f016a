# Lab pipeline stages
