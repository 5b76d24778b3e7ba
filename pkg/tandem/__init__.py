# tandemnet core: tensors, neurons, surrogates, codec, tandem network
