"""Print both detector architectures as layer tables (shape and param count)."""

from stutterkit.detectors import build_prolongation_model, build_repetition_model


def show(name, model):
    print(f"\n{name}  (input {model.input_shape})")
    print(f"{'Layer':<12} {'Output Shape':<16} {'Param #':>8}")
    for layer, shape in zip(model.layers, model.shape_trace()[1:]):
        print(f"{layer.kind:<12} {str(shape):<16} {layer.param_count():>8}")
    print(f"{'Total':<12} {'':<16} {model.param_count():>8}")


if __name__ == "__main__":
    show("prolongation detector", build_prolongation_model())
    show("repetition detector", build_repetition_model())
