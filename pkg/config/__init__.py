from config.settings import ScenarioConfig, FrameConfig, PathLossParams, CampaignSpec, load_scenario
