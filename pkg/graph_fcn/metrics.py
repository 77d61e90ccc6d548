''' segmentation metrics from a confusion matrix: mIOU, pixel accuracy, f.w.IU '''
import numpy as np

from graph_fcn.errors import DimensionError, UndefinedMetricError, ValidationError
from graph_fcn.graph import IGNORE


class ConfusionMatrix(object):
    """counts[i, j] = pixels of true class i predicted as j."""

    def __init__(self, num_classes):
        if num_classes < 1:
            raise ValidationError('num_classes must be positive, got %r' % num_classes)
        self.num_classes = num_classes
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    def accumulate(self, predicted, truth):
        predicted = np.asarray(predicted).astype(np.int64)
        truth = np.asarray(truth).astype(np.int64)
        if predicted.shape != truth.shape:
            raise DimensionError('prediction %s and truth %s extents differ' % (predicted.shape, truth.shape))
        index = truth != IGNORE
        truth, predicted = truth[index], predicted[index]
        n = self.num_classes
        for name, values in (('truth', truth), ('prediction', predicted)):
            if values.size and (values.min() < 0 or values.max() >= n):
                raise ValidationError('%s label outside [0, %d)' % (name, n))
        count = np.bincount(n * truth + predicted, minlength=n * n)
        self.counts += count.reshape(n, n)
        return self

    def merge(self, other):
        if other.num_classes != self.num_classes:
            raise DimensionError('cannot merge %d-class and %d-class matrices'
                                 % (self.num_classes, other.num_classes))
        self.counts += other.counts
        return self

    @property
    def total(self):
        return int(self.counts.sum())

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return 'ConfusionMatrix(num_classes=%d, total=%d)' % (self.num_classes, self.total)


def _checked(cm):
    if cm.total == 0:
        raise UndefinedMetricError('confusion matrix is empty')
    return cm.counts.astype(np.float64)


def per_class_iou(cm):
    """IoU per class; nan for classes absent from both truth and prediction."""
    counts = _checked(cm)
    intersection = np.diag(counts)
    union = counts.sum(axis=1) + counts.sum(axis=0) - intersection
    iou = np.full(cm.num_classes, np.nan)
    present = union > 0
    iou[present] = intersection[present] / union[present]
    return iou


def pixel_accuracy(cm):
    counts = _checked(cm)
    return float(np.diag(counts).sum() / counts.sum())


def mean_iou(cm):
    return float(np.nanmean(per_class_iou(cm)))


def freq_weighted_iou(cm):
    counts = _checked(cm)
    iou = np.nan_to_num(per_class_iou(cm))
    freq = counts.sum(axis=1)
    return float((freq * iou).sum() / freq.sum())


def to_json(cm):
    return {
        'miou': mean_iou(cm),
        'acc': pixel_accuracy(cm),
        'fwiu': freq_weighted_iou(cm),
        'per_class_iou': [None if np.isnan(v) else float(v) for v in per_class_iou(cm)],
    }
