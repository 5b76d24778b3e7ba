# tandemnet utilities package
