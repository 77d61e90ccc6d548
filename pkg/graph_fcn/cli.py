import argparse
import json
import logging
import os
import shutil
import sys

from graph_fcn.backbone import BackboneConfig
from graph_fcn.checkpoint import load_checkpoint, save_checkpoint
from graph_fcn.config import load_run_config
from graph_fcn.data import (generate_shapes, load_split, read_image, split_ids, write_dataset,
                            write_prediction)
from graph_fcn.errors import ConfigError, GraphFCNError, ParameterError
from graph_fcn.gradcheck import DEFAULT_TOLERANCE, full_model_check
from graph_fcn.graph import SYMMETRIZE_MODES, build_adjacency, format_triples, receptive_field
from graph_fcn.metrics import to_json
from graph_fcn.model import evaluate, predict
from graph_fcn.training import TrainConfig, train
from graph_fcn.utils import logger

USAGE_EXIT = 2
FAILURE_EXIT = 1


def image_size(text):
    try:
        h, w = (int(v) for v in text.lower().split('x'))
    except ValueError:
        raise argparse.ArgumentTypeError("size must look like HxW, got '%s'" % text)
    if h < 1 or w < 1:
        raise argparse.ArgumentTypeError("size must be positive, got '%s'" % text)
    return h, w


def _emit(payload):
    sys.stdout.write(json.dumps(payload, indent=2) + '\n')


def generate_data(args):
    root = args.out
    if os.path.isdir(root) and os.listdir(root):
        if not args.force:
            raise ParameterError('%s is not empty; pass --force to overwrite' % root)
        for stale in ('images', 'labels'):
            shutil.rmtree(os.path.join(root, stale), ignore_errors=True)
    H, W = args.size
    samples = generate_shapes(args.count, H, W, args.classes, args.seed)
    _, test_ids = split_ids([s.id for s in samples], args.test_fraction, args.seed)
    split = write_dataset(root, samples, test_ids)
    logger.info("wrote %d samples (%d train, %d test) to %s" % (len(samples), len(split['train']), len(split['test']), root))
    _emit({'out': root, 'train': len(split['train']), 'test': len(split['test'])})


def train_model(args):
    run = load_run_config(args.config)
    train_cfg = run.train
    if args.full_scale:
        train_cfg = TrainConfig.full_scale(lambda_node=train_cfg.lambda_node, epochs=train_cfg.epochs,
                                             seed=train_cfg.seed)
    if args.no_gcn:
        train_cfg = train_cfg.without_gcn()
    ncl = run.model.backbone.num_classes
    train_set = load_split(args.data, 'train', ncl)
    test_set = load_split(args.data, 'test', ncl)
    logger.info("train %d / test %d images from %s" % (len(train_set), len(test_set), args.data))
    logger.debug(repr(train_cfg))

    out_dir = os.path.dirname(args.out) or '.'

    def _save(report):
        save_checkpoint(report.params, args.out)
        with open(os.path.join(out_dir, 'report.csv'), 'w') as f:
            f.write(report.to_csv())
        with open(os.path.join(out_dir, 'metrics.json'), 'w') as f:
            f.write(report.metrics_json() + '\n')

    report = train(train_set, run.model, train_cfg, test_set=test_set, on_epoch=_save)
    if not report.epochs:
        _save(report)
    last = report.epochs[-1].to_dict() if report.epochs else None
    _emit({'checkpoint': args.out, 'iterations': len(report.steps), 'last_epoch': last})


def _load_model(path):
    params = load_checkpoint(path)
    return params, BackboneConfig.from_params(params)


def eval_model(args):
    params, backbone = _load_model(args.ckpt)
    samples = load_split(args.data, args.split, backbone.num_classes)
    metrics = to_json(evaluate(samples, params, backbone))
    logger.info("%s split: mIOU %.4f, acc %.4f, f.w.IU %.4f"
                % (args.split, metrics['miou'], metrics['acc'], metrics['fwiu']))
    if args.out:
        with open(args.out, 'w') as f:
            json.dump(metrics, f, indent=2)
    _emit(metrics)


def predict_image(args):
    params, backbone = _load_model(args.ckpt)
    label_map = predict(read_image(args.image), params, backbone)
    write_prediction(label_map, args.out)
    logger.info("wrote %dx%d prediction to %s" % (label_map.shape[0], label_map.shape[1], args.out))
    _emit({'out': args.out, 'height': label_map.shape[0], 'width': label_map.shape[1]})


def inspect_graph(args):
    h, w = args.size
    adjacency = build_adjacency(h, w, args.l, args.sigma, args.symmetrize)
    field = None
    if args.node is not None:
        field = sorted(receptive_field(adjacency, args.node, args.hops))
    if args.quiet:
        payload = {'nodes': h * w, 'edges': adjacency.triples()}
        if field is not None:
            payload['receptive_field'] = {'node': args.node, 'hops': args.hops, 'size': len(field), 'members': field}
        _emit(payload)
        return
    sys.stdout.write(format_triples(adjacency) + '\n')
    if field is not None:
        sys.stdout.write('# receptive field of node %d within %d hops: %d nodes %s\n'
                         % (args.node, args.hops, len(field), field))


def check_grads(args):
    result = full_model_check(seed=args.seed, count=args.count)
    worst = result.worst()
    _emit({'checked': len(result.entries), 'max_rel_error': result.max_error,
           'tolerance': DEFAULT_TOLERANCE, 'passed': result.passed()})
    if not result.passed():
        logger.error("gradient check failed: input %d element %d analytic %r numeric %r" % worst[:4])
        return FAILURE_EXIT
    logger.info("gradient check passed on %d entries (max rel. error %.3g)" % (len(result.entries), result.max_error))


def build_parser():
    parser = argparse.ArgumentParser(prog='graph_fcn', description='Graph-FCN semantic segmentation at desk scale')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--quiet', action='store_true', help='warnings only; stdout stays machine-readable')
    verbosity.add_argument('--verbose', action='store_true', help='debug logging')
    commands = parser.add_subparsers(dest='command', required=True)

    p = commands.add_parser('generate-data', help='write a synthetic shapes dataset')
    p.add_argument('--out', type=str, required=True)
    p.add_argument('--count', type=int, default=250)
    p.add_argument('--size', type=image_size, default=(64, 64), help='HxW')
    p.add_argument('--classes', type=int, default=4)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--test-fraction', type=float, default=0.2)
    p.add_argument('--force', action='store_true', help='overwrite a non-empty directory')
    p.set_defaults(handler=generate_data)

    p = commands.add_parser('train', help='two-phase dual-loss training')
    p.add_argument('--data', type=str, required=True)
    p.add_argument('--config', type=str, default=None, help='YAML or JSON overrides of run_config.yaml')
    p.add_argument('--out', type=str, required=True, help='checkpoint path')
    p.add_argument('--no-gcn', action='store_true', help='plain FCN baseline (lambda 0, no warm-up)')
    p.add_argument('--full-scale', action='store_true', help='full-scale schedule and rates')
    p.set_defaults(handler=train_model)

    p = commands.add_parser('eval', help='segmentation metrics of a checkpoint')
    p.add_argument('--data', type=str, required=True)
    p.add_argument('--ckpt', type=str, required=True)
    p.add_argument('--split', type=str, default='test')
    p.add_argument('--out', type=str, default=None, help='metrics.json path')
    p.set_defaults(handler=eval_model)

    p = commands.add_parser('predict', help='label raster for one image')
    p.add_argument('--image', type=str, required=True)
    p.add_argument('--ckpt', type=str, required=True)
    p.add_argument('--out', type=str, required=True)
    p.set_defaults(handler=predict_image)

    p = commands.add_parser('inspect-graph', help='print grid adjacency and receptive fields')
    p.add_argument('--size', type=image_size, required=True, help='grid HxW')
    p.add_argument('--l', type=int, default=4)
    p.add_argument('--sigma', type=float, default=1.0)
    p.add_argument('--symmetrize', choices=SYMMETRIZE_MODES, default='min')
    p.add_argument('--node', type=int, default=None)
    p.add_argument('--hops', type=int, default=1)
    p.set_defaults(handler=inspect_graph)

    p = commands.add_parser('check-grads', help='finite-difference check of the full model')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--count', type=int, default=50)
    p.set_defaults(handler=check_grads)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.quiet:
        logger.logging_verbosity(logging.WARNING)
    elif args.verbose:
        logger.logging_verbosity(logging.DEBUG)
    else:
        logger.logging_verbosity(logging.INFO)
    try:
        return args.handler(args) or 0
    except (ConfigError, ParameterError) as e:
        logger.error(str(e))
        return USAGE_EXIT
    except (GraphFCNError, OSError) as e:
        logger.error(str(e))
        return FAILURE_EXIT
