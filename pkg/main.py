import sys
import logging
import argparse
from datetime import datetime
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

# 导入自定义组件
from config.config import Config
from config.scenario import Scenario, ScenarioError, load_scenario
from channels.diagonal import SingularChannelError
from channels.extended_channel import ChannelBounds, ExtendedChannel, random_channel
from processors.channel_aiding import (
    AidingStructure, ChannelAidingVerifier, InfeasibleStructureError, MatchReport, VerificationResult
)
from processors.ia_designer import AlignmentReport, BeamformingSet, DesignError, IADesigner, PeelingPlan
from processors.rate_simulator import NotDecodableError, RateSimulator, SlopeEstimate
from solvers.dof_lp import DoFAssignment, DoFSolver, DualCertificate, KKTReport, LinearProgram, NetworkClass
from solvers.rational_simplex import SolverError
from storage.report_writer import ReportWriter

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_INFEASIBLE = 4

DEFAULT_EPS_LIST = [1e-1, 1e-2, 1e-3, 0.0]


@dataclass
class DoFResult:
    lp: LinearProgram
    assignment: DoFAssignment
    dual: DualCertificate
    network_class: NetworkClass
    kkt: KKTReport


@dataclass
class ChannelResult:
    """一轮信道准备的结果：剥离计划（含各轮条件）、信道与逐轮校验"""
    dof: DoFResult
    plan: PeelingPlan
    channel: ExtendedChannel
    verifications: List[VerificationResult]
    source: str
    attempts: Optional[int] = None

    @property
    def feasible(self) -> bool:
        return all(v.feasible for v in self.verifications)


@dataclass
class DesignResult:
    prepared: ChannelResult
    beamformers: BeamformingSet
    forced: bool
    alignment: Optional[AlignmentReport] = None


@dataclass
class PipelineResult:
    design: DesignResult
    alignment: AlignmentReport
    slope: Optional[SlopeEstimate]
    artifacts: List[Path] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.design.prepared.feasible and self.alignment.decodable


class IAWorkbench:
    def __init__(self, config: Config, scenario: Scenario, seed: Optional[int] = None,
                 out_dir: Optional[str] = None, generic: bool = False):
        """
        初始化实验工作台
        params:
            config: 配置对象
            scenario: 解析后的场景
            seed: 覆盖场景中的随机种子
            out_dir: 覆盖输出目录
            generic: 跳过信道合成，直接使用一般随机信道
        """
        self.config = config
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.generic = generic
        self.bounds = ChannelBounds(
            g_min=scenario.g_min if scenario.g_min is not None else config.channel_config['g_min'],
            g_max=scenario.g_max if scenario.g_max is not None else config.channel_config['g_max'],
        )
        # 初始化各个组件
        self.solver = DoFSolver(config)
        self.aiding = ChannelAidingVerifier(config)
        self.designer = IADesigner(config)
        self.simulator = RateSimulator(config)
        self.writer = ReportWriter(config, out_dir or scenario.out_dir)
        self.logger = logging.getLogger(__name__)
        self._rng = np.random.default_rng(self.seed)

    @property
    def network(self):
        return self.scenario.network

    # ------------------------------------------------------------------
    def run_dof(self) -> DoFResult:
        lp = self.solver.build_lp(self.network)
        assignment, dual = self.solver.solve_optimal_dof(lp)
        kkt = self.solver.verify_kkt(lp, assignment, dual)
        if not kkt.ok:
            raise SolverError(f"[dof-lp] KKT 校验失败: {kkt.details}")
        network_class = self.solver.classify(self.network)
        return DoFResult(lp, assignment, dual, network_class, kkt)

    def _structure(self, plan: PeelingPlan) -> Optional[AidingStructure]:
        """τ 容纳不下成对取值时返回 None（此时第一轮不应存在环）"""
        if 2 * self.scenario.distinct_values > plan.tau:
            return None
        first = plan.rounds[0]
        columns = next(iter(first.columns.values()))
        return AidingStructure.balanced(columns, plan.tau, self.scenario.distinct_values, self.scenario.T_target)

    def prepare_channel(self) -> ChannelResult:
        """求解自由度、制定剥离计划，并得到合成信道（或一般随机信道）及逐轮条件校验"""
        dof = self.run_dof()
        plan = self.designer.plan_irregular(self.network, dof.assignment, self.scenario.n,
                                            N_e=self.scenario.N_e)
        attempts = None
        structure = None if self.generic else self._structure(plan)
        if self.scenario.channel_file is not None:
            source = "file"
            channel = self.writer.read_channel(self.scenario.channel_file)
        elif structure is None:
            source = "generic"
            channel = random_channel(plan.tau, self.network.K, self.network.N, self._rng, self.bounds)
        else:
            source = "aided"
            synthesis = self.aiding.synthesize_aided_channel(
                plan.rounds[0].network, structure, self._rng, self.bounds)
            channel, attempts = synthesis.channel, synthesis.attempts
        if channel.tau != plan.tau:
            raise ScenarioError(f"信道扩展长度 {channel.tau} 与计划 τ={plan.tau} 不一致")

        plan = self.designer.plan_irregular(self.network, dof.assignment, self.scenario.n,
                                            channel=channel, N_e=self.scenario.N_e)
        verifications = []
        for rnd in plan.rounds:
            columns = next(iter(rnd.columns.values()))
            verification = self.aiding.verify_conditions(rnd.conditions, columns, tau=plan.tau)
            self.logger.info(f"第 {rnd.index} 轮: {len(rnd.conditions)} 个条件, {verification.reason}")
            verifications.append(verification)
        return ChannelResult(dof, plan, channel, verifications, source, attempts)

    def run_design(self) -> DesignResult:
        prepared = self.prepare_channel()
        forced = not prepared.feasible
        if forced:
            self.logger.warning("条件不可行，改用强制设计（结果预期不可解码）")
        beamformers = self.designer.design_beamformers(prepared.channel, self.network, prepared.plan,
                                                       self._rng, force=forced)
        return DesignResult(prepared, beamformers, forced)

    def run_verify(self) -> DesignResult:
        design = self.run_design()
        design.alignment = self.designer.verify_alignment(design.prepared.channel, self.network,
                                                          design.beamformers)
        return design

    def run_simulate(self) -> SlopeEstimate:
        design = self.run_verify()
        return self.simulator.dof_slope(design.prepared.channel, self.network, design.beamformers,
                                        self.scenario.snr_db)

    def run_pipeline(self) -> PipelineResult:
        design = self.run_verify()
        prepared = design.prepared
        artifacts = [
            self.writer.write_channel('channel.txt', prepared.channel),
            self.writer.write_beamformers('beamformers.txt', design.beamformers),
        ]
        slope = None
        if design.alignment.decodable:
            slope = self.simulator.dof_slope(prepared.channel, self.network, design.beamformers,
                                             self.scenario.snr_db)
            artifacts.append(self.writer.write_rates('rates.csv', slope.points, self.network.K, slope.dof))
        else:
            self.logger.warning("对齐不可解码，跳过速率仿真")
        result = PipelineResult(design, design.alignment, slope, artifacts)
        result.artifacts.append(self.writer.write_lines('report.txt', self.report_lines(result)))
        return result

    def report_lines(self, result: PipelineResult) -> List[str]:
        prepared = result.design.prepared
        dof = prepared.dof
        lines = [
            f"scenario={self.scenario.name}",
            f"seed={self.seed}",
            f"class={dof.network_class.value}",
            f"d={dof.assignment.format()}",
            f"total={dof.assignment.total}",
            f"N_e={prepared.plan.N_e}",
            f"n={prepared.plan.n}",
            f"tau={prepared.plan.tau}",
            f"rounds={len(prepared.plan.rounds)}",
            f"conditions={prepared.plan.condition_count}",
            f"channel={prepared.source}",
            f"feasible={str(prepared.feasible).lower()}",
            f"forced_design={str(result.design.forced).lower()}",
        ]
        for warning in prepared.plan.warnings:
            lines.append(f"warning={warning}")
        for r in result.alignment.receivers:
            lines.append(f"receiver_{r.receiver}: desired={r.desired_dim}/{r.expected_desired} "
                         f"interference={r.interference_dim} joint={r.joint_dim} "
                         f"decodable={str(r.decodable).lower()}")
        lines.append(f"decodable={str(result.alignment.decodable).lower()}")
        if result.slope is not None:
            lines.append(f"dof_estimate={self.config.output_config['float_format'] % result.slope.dof}")
        return lines

    def run_match(self) -> List[MatchReport]:
        if self.scenario.slot_stream is None:
            raise ScenarioError("场景缺少 slot_stream")
        stream = self.writer.read_channel(self.scenario.slot_stream)
        dof = self.run_dof()
        plan = self.designer.plan_irregular(self.network, dof.assignment, self.scenario.n,
                                            N_e=self.scenario.N_e)
        first = plan.rounds[0]
        columns = next(iter(first.columns.values()))
        reports = []
        for eps in self.scenario.eps_list or DEFAULT_EPS_LIST:
            reports.append(self.aiding.match_slots(stream, first.network, columns, plan.tau, eps=eps,
                                                    progress=True))
        self.writer.write_match('match.csv', reports)
        return reports


# ----------------------------------------------------------------------
def setup_logging(config: Config) -> None:
    """设置日志系统"""
    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    root = logging.getLogger()
    root.handlers.clear()
    root.setLevel(getattr(logging, str(config.logging_config['level']).upper(), logging.INFO))

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    root.addHandler(console_handler)

    if config.logging_config['to_file']:
        log_dir = Path(config.logging_config['log_dir'])
        log_dir.mkdir(parents=True, exist_ok=True)
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        file_handler = logging.FileHandler(log_dir / f"ia_workbench_{timestamp}.log", encoding='utf-8')
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="干扰对齐自由度实验工作台")
    parser.add_argument("command", choices=['dof', 'classify', 'conditions', 'synth', 'design',
                                            'verify', 'simulate', 'pipeline', 'match'],
                        help="执行的阶段")
    parser.add_argument("--scenario", required=True, help="场景文件路径")
    parser.add_argument("--seed", type=int, help="随机种子（覆盖场景中的 seed）")
    parser.add_argument("--out", help="输出目录")
    parser.add_argument("--generic", action="store_true", help="跳过信道合成，使用一般随机信道")
    parser.add_argument("--config", help="配置文件路径")
    return parser


def _print_prepared(prepared: ChannelResult) -> None:
    plan = prepared.plan
    print(f"tau = {plan.tau}, rounds = {len(plan.rounds)}, conditions = {plan.condition_count}")
    for rnd, verification in zip(plan.rounds, prepared.verifications):
        print(f"round {rnd.index}: transmitters = {sorted(rnd.columns)}, "
              f"columns = {next(iter(rnd.columns.values()))}, conditions = {len(rnd.conditions)}, "
              f"partition = {list(verification.partition.sizes)}, "
              f"feasible = {str(verification.feasible).lower()}")
        for cond in rnd.conditions:
            print(f"  T{cond.index + 1} (receiver {cond.receiver}, root {cond.root}) = {cond.describe()}")


def run_command(args, config: Config) -> int:
    scenario = load_scenario(args.scenario)
    bench = IAWorkbench(config, scenario, seed=args.seed, out_dir=args.out, generic=args.generic)

    if args.command == 'dof':
        result = bench.run_dof()
        print(f"d = {result.assignment.format()}, total = {result.assignment.total}, "
              f"class = {result.network_class.value}")
        for j, value in sorted(result.dual.lam.items()):
            print(f"lambda_{j} = {value}")
        print(f"dual_value = {result.dual.value}")
        print(f"kkt = {'ok' if result.kkt.ok else 'failed'}")
        return EXIT_OK

    if args.command == 'classify':
        print(f"class = {bench.solver.classify(scenario.network).value}")
        return EXIT_OK

    if args.command in ('conditions', 'synth'):
        prepared = bench.prepare_channel()
        _print_prepared(prepared)
        if args.command == 'synth':
            path = bench.writer.write_channel('channel.txt', prepared.channel)
            print(f"channel = {path}")
        return EXIT_OK if prepared.feasible else EXIT_INFEASIBLE

    if args.command == 'design':
        design = bench.run_design()
        path = bench.writer.write_beamformers('beamformers.txt', design.beamformers)
        print(f"beamformers = {path}, forced = {str(design.forced).lower()}")
        return EXIT_INFEASIBLE if design.forced else EXIT_OK

    if args.command == 'verify':
        design = bench.run_verify()
        for r in design.alignment.receivers:
            print(f"receiver {r.receiver}: desired = {r.desired_dim}/{r.expected_desired}, "
                  f"interference = {r.interference_dim}, joint = {r.joint_dim}, "
                  f"decodable = {str(r.decodable).lower()}")
        return EXIT_OK if design.alignment.decodable else EXIT_INFEASIBLE

    if args.command == 'simulate':
        slope = bench.run_simulate()
        path = bench.writer.write_rates('rates.csv', slope.points, scenario.network.K, slope.dof)
        print(f"dof_estimate={config.output_config['float_format'] % slope.dof}")
        print(f"rates = {path}")
        return EXIT_OK

    if args.command == 'pipeline':
        result = bench.run_pipeline()
        for line in bench.report_lines(result):
            print(line)
        return EXIT_OK if result.success else EXIT_INFEASIBLE

    reports = bench.run_match()
    for report in reports:
        print(f"epsilon = {report.epsilon:g}, match_rate = {report.match_rate:.6f}, "
              f"worst_residual = {report.worst_residual:.3e}, groups = {len(report.groups)}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config = Config(args.config)
    setup_logging(config)
    logger = logging.getLogger("ia_workbench")
    try:
        return run_command(args, config)
    except (InfeasibleStructureError, NotDecodableError) as e:
        logger.error(f"不可行: {str(e)}")
        return EXIT_INFEASIBLE
    except (SolverError, DesignError, SingularChannelError, np.linalg.LinAlgError) as e:
        logger.error(f"数值/求解错误: {str(e)}")
        return EXIT_NUMERIC
    except (ValueError, OSError) as e:
        logger.error(f"输入错误: {str(e)}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
