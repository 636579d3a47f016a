# Computational engines of the trigonometric equivalence lab
