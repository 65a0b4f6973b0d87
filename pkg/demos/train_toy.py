"""Train the small 1D CNN on a five-class sinusoid toy set.

The classes differ only in frequency, so the network should fit them
within a few dozen epochs.

    python demos/train_toy.py
"""

import math

from ecgpipe.nn import ArchSpec, Dataset, TrainConfig, build, loss, one_hot, predict, train
from ecgpipe.pipeline import signal_inputs
from ecgpipe.synthetic import sinusoid_dataset

records = sinusoid_dataset(per_class=4, n_samples=256, seed=0)
data = Dataset(signal_inputs(records, 256), one_hot([r.label.index for r in records]))

state = build(ArchSpec("cnn1d"), seed=42)
print(f"initial loss {loss(state, data.x, data.y):.4f} (ln 5 = {math.log(5):.4f})")

cfg = TrainConfig(max_epochs=40, batch_size=20, early_stopping_patience=None, seed=42)
best, history = train(state, data, data, cfg)
for h in history[::5]:
    print(f"epoch {h['epoch']:3d}  loss {h['train_loss']:.4f}  acc {h['train_acc']:.2f}  "
          f"lr {h['lr']:.2e}")

labels, _ = predict(best, data.x)
print("predicted:", labels.tolist())
